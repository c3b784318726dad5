//! Floating-point protocols (placeholder).
