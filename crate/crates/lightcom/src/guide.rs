//! The book chapters compiled as doc-tests (placeholder until the book lands).
