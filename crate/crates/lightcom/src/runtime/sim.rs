//! In-memory network simulation: authenticated FIFO channels between the
//! request user (actor 0) and the `P` parties (actors 1..=P), a recorded
//! transcript, and two schedulers.
//!
//! `RoundRobin` hands a baton to one actor at a time: an actor may only send,
//! receive or finish while it holds the baton, and the baton moves to the
//! next ready actor, in index order, whenever the holder blocks or finishes.
//! That makes transcripts byte-reproducible. `Threads` lets all party threads
//! run freely; per-channel FIFO order still holds, so protocol outputs are
//! identical, only the interleaving recorded in the transcript may differ.

use crate::pcdd::{Ciphertext, PartialDecryption};
use crate::{Error, Result};
use rug::Integer;
use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

/// How the simulated parties are interleaved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerMode {
    /// Deterministic cooperative schedule; transcripts are reproducible.
    RoundRobin,
    /// Free-running threads; only per-channel FIFO order is guaranteed.
    Threads,
}

/// A message on a simulated channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Msg {
    /// Channel-establishment handshake.
    Hello,
    Ct(Ciphertext),
    Cts(Vec<Ciphertext>),
    Pd(PartialDecryption),
    Pds(Vec<PartialDecryption>),
    Bit(bool),
    Bits(Vec<bool>),
    /// Pair of opened masks, as in a Beaver-style online stage.
    BitPair(bool, bool),
    Num(Integer),
    Nums(Vec<Integer>),
    NumPair(Integer, Integer),
}

impl Msg {
    /// True when the payload consists of ciphertext material only: nothing a
    /// passive observer could read a plaintext or share from.
    pub fn is_ciphertext_only(&self) -> bool {
        matches!(
            self,
            Msg::Hello | Msg::Ct(_) | Msg::Cts(_) | Msg::Pd(_) | Msg::Pds(_)
        )
    }

    /// Shape label used for structural transcript comparison.
    pub fn shape(&self) -> (u8, usize) {
        match self {
            Msg::Hello => (0, 0),
            Msg::Ct(_) => (1, 1),
            Msg::Cts(v) => (2, v.len()),
            Msg::Pd(_) => (3, 1),
            Msg::Pds(v) => (4, v.len()),
            Msg::Bit(_) => (5, 1),
            Msg::Bits(v) => (6, v.len()),
            Msg::BitPair(..) => (7, 2),
            Msg::Num(_) => (8, 1),
            Msg::Nums(v) => (9, v.len()),
            Msg::NumPair(..) => (10, 2),
        }
    }
}

/// One transcript event.
#[derive(Debug, Clone)]
pub enum Entry {
    Message { from: u8, to: u8, msg: Msg },
    Phase { step: u32, phase: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ready,
    /// Blocked receiving from the given actor.
    Blocked(usize),
    Done,
}

struct NetState {
    queues: Vec<VecDeque<Msg>>,
    status: Vec<Status>,
    /// Baton holder in round-robin mode.
    turn: usize,
    transcript: Option<Vec<Entry>>,
    abort: Option<String>,
}

/// The simulated network for one cluster: `parties + 1` actors, actor 0 is
/// the request user.
pub struct SimNet {
    parties: usize,
    mode: SchedulerMode,
    state: Mutex<NetState>,
    cv: Condvar,
}

const WAIT_TIMEOUT: Duration = Duration::from_secs(60);

impl SimNet {
    pub fn new(parties: usize, mode: SchedulerMode) -> Self {
        let actors = parties + 1;
        SimNet {
            parties,
            mode,
            state: Mutex::new(NetState {
                queues: (0..actors * actors).map(|_| VecDeque::new()).collect(),
                status: vec![Status::Ready; actors],
                turn: 1,
                transcript: None,
                abort: None,
            }),
            cv: Condvar::new(),
        }
    }

    pub fn mode(&self) -> SchedulerMode {
        self.mode
    }

    fn queue_index(&self, from: usize, to: usize) -> usize {
        from * (self.parties + 1) + to
    }

    pub fn set_transcript(&self, enabled: bool) {
        let mut state = self.state.lock().unwrap();
        state.transcript = if enabled { Some(Vec::new()) } else { None };
    }

    pub fn take_transcript(&self) -> Vec<Entry> {
        let mut state = self.state.lock().unwrap();
        match state.transcript.as_mut() {
            Some(t) => std::mem::take(t),
            None => Vec::new(),
        }
    }

    pub fn mark_phase(&self, step: u32, phase: u8) {
        let mut state = self.state.lock().unwrap();
        if let Some(t) = state.transcript.as_mut() {
            t.push(Entry::Phase { step, phase });
        }
    }

    /// Reset scheduler bookkeeping before a protocol run. Queues survive so
    /// that user-seeded inputs remain deliverable.
    pub fn begin_run(&self) {
        let mut state = self.state.lock().unwrap();
        for s in state.status.iter_mut() {
            *s = Status::Ready;
        }
        state.turn = 1;
        state.abort = None;
    }

    fn log(state: &mut NetState, from: usize, to: usize, msg: &Msg) {
        if let Some(t) = state.transcript.as_mut() {
            t.push(Entry::Message {
                from: from as u8,
                to: to as u8,
                msg: msg.clone(),
            });
        }
    }

    /// Move the baton to the next ready actor after `from`. Returns false if
    /// nobody can run, which is a deadlock.
    fn pass_turn(&self, state: &mut NetState, from: usize) -> bool {
        let actors = self.parties;
        for offset in 1..=actors {
            let candidate = (from - 1 + offset) % actors + 1;
            if state.status[candidate] == Status::Ready {
                state.turn = candidate;
                return true;
            }
        }
        state.status.iter().skip(1).all(|s| *s == Status::Done)
    }

    fn wait_for_turn<'a>(
        &self,
        mut state: std::sync::MutexGuard<'a, NetState>,
        me: usize,
    ) -> Result<std::sync::MutexGuard<'a, NetState>> {
        loop {
            if let Some(reason) = &state.abort {
                return Err(Error::ProtocolAbort(reason.clone()));
            }
            if self.mode == SchedulerMode::Threads || state.turn == me {
                return Ok(state);
            }
            let (next, timeout) = self.cv.wait_timeout(state, WAIT_TIMEOUT).unwrap();
            state = next;
            if timeout.timed_out() {
                state.abort = Some("scheduler stalled".into());
                self.cv.notify_all();
                return Err(Error::ProtocolAbort("scheduler stalled".into()));
            }
        }
    }

    /// Send a message; never blocks (channels are unbounded).
    pub fn send(&self, from: usize, to: usize, msg: Msg) -> Result<()> {
        let state = self.state.lock().unwrap();
        let mut state = self.wait_for_turn(state, from)?;
        Self::log(&mut state, from, to, &msg);
        let qi = self.queue_index(from, to);
        state.queues[qi].push_back(msg);
        if state.status[to] == Status::Blocked(from) {
            state.status[to] = Status::Ready;
        }
        self.cv.notify_all();
        Ok(())
    }

    /// Receive the next message from `from`, blocking until it arrives.
    pub fn recv(&self, me: usize, from: usize) -> Result<Msg> {
        let qi = self.queue_index(from, me);
        let mut state = self.state.lock().unwrap();
        loop {
            state = self.wait_for_turn(state, me)?;
            if let Some(msg) = state.queues[qi].pop_front() {
                state.status[me] = Status::Ready;
                return Ok(msg);
            }
            state.status[me] = Status::Blocked(from);
            if self.mode == SchedulerMode::RoundRobin && !self.pass_turn(&mut state, me) {
                state.abort = Some(format!("deadlock: party {me} awaits party {from}"));
                self.cv.notify_all();
                return Err(Error::ProtocolAbort(state.abort.clone().unwrap()));
            }
            self.cv.notify_all();
            let (next, timeout) = self.cv.wait_timeout(state, WAIT_TIMEOUT).unwrap();
            state = next;
            if timeout.timed_out() {
                state.abort = Some("channel receive timed out".into());
                self.cv.notify_all();
                return Err(Error::ProtocolAbort("channel receive timed out".into()));
            }
            if self.mode == SchedulerMode::Threads {
                // Another blocked receiver may have been woken spuriously;
                // deadlock is declared only when every party is blocked.
                if state.queues[qi].is_empty()
                    && state
                        .status
                        .iter()
                        .skip(1)
                        .all(|s| matches!(s, Status::Blocked(_) | Status::Done))
                {
                    state.abort = Some(format!("deadlock: party {me} awaits party {from}"));
                    self.cv.notify_all();
                    return Err(Error::ProtocolAbort(state.abort.clone().unwrap()));
                }
            }
        }
    }

    /// Mark an actor finished for this run and hand the baton on.
    pub fn finish(&self, me: usize, failed: Option<String>) {
        let mut state = self.state.lock().unwrap();
        state.status[me] = Status::Done;
        if let Some(reason) = failed {
            if state.abort.is_none() {
                state.abort = Some(reason);
            }
        }
        if self.mode == SchedulerMode::RoundRobin && state.abort.is_none() {
            self.pass_turn(&mut state, me);
        }
        self.cv.notify_all();
    }

    /// Enqueue a message from the user (actor 0) outside any run.
    pub fn seed_from_user(&self, to: usize, msg: Msg) {
        let mut state = self.state.lock().unwrap();
        Self::log(&mut state, 0, to, &msg);
        let qi = self.queue_index(0, to);
        state.queues[qi].push_back(msg);
        self.cv.notify_all();
    }

    /// Drain everything the parties sent to the user (actor 0), in party
    /// index order.
    pub fn drain_to_user(&self) -> Vec<(usize, Msg)> {
        let mut state = self.state.lock().unwrap();
        let mut out = Vec::new();
        for from in 1..=self.parties {
            let qi = self.queue_index(from, 0);
            while let Some(msg) = state.queues[qi].pop_front() {
                out.push((from, msg));
            }
        }
        out
    }

    /// True when every inter-party queue is empty (no stray messages).
    pub fn quiescent(&self) -> bool {
        let state = self.state.lock().unwrap();
        (1..=self.parties).all(|from| {
            (1..=self.parties)
                .all(|to| state.queues[self.queue_index(from, to)].is_empty())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn ping_pong(mode: SchedulerMode) -> Vec<Entry> {
        let net = Arc::new(SimNet::new(2, mode));
        net.set_transcript(true);
        net.begin_run();
        let n1 = net.clone();
        let n2 = net.clone();
        let a = std::thread::spawn(move || {
            n1.send(1, 2, Msg::Num(Integer::from(7))).unwrap();
            let got = n1.recv(1, 2).unwrap();
            n1.finish(1, None);
            got
        });
        let b = std::thread::spawn(move || {
            let got = n2.recv(2, 1).unwrap();
            if let Msg::Num(x) = got {
                n2.send(2, 1, Msg::Num(x + 1u8)).unwrap();
            }
            n2.finish(2, None);
        });
        assert_eq!(a.join().unwrap(), Msg::Num(Integer::from(8)));
        b.join().unwrap();
        net.take_transcript()
    }

    #[test]
    fn round_robin_transcript_is_deterministic() {
        let t1 = ping_pong(SchedulerMode::RoundRobin);
        let t2 = ping_pong(SchedulerMode::RoundRobin);
        let shapes = |t: &[Entry]| {
            t.iter()
                .map(|e| match e {
                    Entry::Message { from, to, msg } => (*from, *to, msg.shape()),
                    Entry::Phase { .. } => (255, 255, (255, 0)),
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(shapes(&t1), shapes(&t2));
        assert_eq!(t1.len(), 2);
    }

    #[test]
    fn threads_mode_delivers_fifo() {
        let net = Arc::new(SimNet::new(2, SchedulerMode::Threads));
        net.begin_run();
        let n1 = net.clone();
        let sender = std::thread::spawn(move || {
            for i in 0..100u32 {
                n1.send(1, 2, Msg::Num(Integer::from(i))).unwrap();
            }
            n1.finish(1, None);
        });
        let n2 = net.clone();
        let receiver = std::thread::spawn(move || {
            for i in 0..100u32 {
                assert_eq!(n2.recv(2, 1).unwrap(), Msg::Num(Integer::from(i)));
            }
            n2.finish(2, None);
        });
        sender.join().unwrap();
        receiver.join().unwrap();
        assert!(net.quiescent());
    }

    #[test]
    fn deadlock_is_detected() {
        for mode in [SchedulerMode::RoundRobin, SchedulerMode::Threads] {
            let net = Arc::new(SimNet::new(2, mode));
            net.begin_run();
            let n1 = net.clone();
            let a = std::thread::spawn(move || {
                let r = n1.recv(1, 2);
                n1.finish(1, None);
                r
            });
            let n2 = net.clone();
            let b = std::thread::spawn(move || {
                let r = n2.recv(2, 1);
                n2.finish(2, None);
                r
            });
            assert!(a.join().unwrap().is_err());
            assert!(b.join().unwrap().is_err());
        }
    }
}
