//! Line-oriented event traces.
//!
//! ```text
//! coldtrace v1
//! threads 2 fanout 4 duration 10
//! truth cold 0 1
//! truth hot 2
//! 0 push 0 1
//! 0 alloc 0 0 leaf 32
//! 0 alloc 1 2 internal 48 0 1
//! 3 write 1 2 0
//! 5 read 0 2 -
//! 7 kill 2
//! 8 pop 0
//! end 7
//! ```
//!
//! The `end` footer carries the event count; a missing footer means the
//! file was cut short.

use std::io::{BufRead, Write};

use crate::error::{Result, SimError};
use crate::heap::{Millis, ObjectId, ObjectKind};
use crate::workload::{GroundTruth, TraceEvent};

const MAGIC: &str = "coldtrace v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceHeader {
    pub threads: u32,
    pub fanout: u32,
    pub duration_ms: Millis,
}

pub fn format_event(e: &TraceEvent) -> String {
    let slot = |s: &Option<u32>| s.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    match e {
        TraceEvent::Alloc {
            time,
            thread,
            id,
            kind,
            size,
            refs,
        } => {
            let mut line = format!("{time} alloc {thread} {} {} {size}", id.0, kind.as_str());
            for r in refs {
                line.push(' ');
                line.push_str(&r.0.to_string());
            }
            line
        }
        TraceEvent::Kill { time, id } => format!("{time} kill {}", id.0),
        TraceEvent::Read {
            time,
            thread,
            id,
            slot: s,
        } => format!("{time} read {thread} {} {}", id.0, slot(s)),
        TraceEvent::Write {
            time,
            thread,
            id,
            slot: s,
        } => format!("{time} write {thread} {} {}", id.0, slot(s)),
        TraceEvent::Push { time, thread, tag } => format!("{time} push {thread} {tag}"),
        TraceEvent::Pop { time, thread } => format!("{time} pop {thread}"),
    }
}

pub struct TraceWriter<W: Write> {
    out: W,
    count: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, header: &TraceHeader, truth: &GroundTruth) -> Result<Self> {
        writeln!(out, "{MAGIC}")?;
        writeln!(
            out,
            "threads {} fanout {} duration {}",
            header.threads, header.fanout, header.duration_ms
        )?;
        for (label, ids) in [("cold", &truth.cold_ids), ("hot", &truth.hot_ids)] {
            write!(out, "truth {label}")?;
            for id in ids {
                write!(out, " {}", id.0)?;
            }
            writeln!(out)?;
        }
        Ok(TraceWriter { out, count: 0 })
    }

    pub fn event(&mut self, e: &TraceEvent) -> Result<()> {
        writeln!(self.out, "{}", format_event(e))?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        writeln!(self.out, "end {}", self.count)?;
        self.out.flush()?;
        Ok(self.out)
    }
}

fn perr(line: usize, message: impl Into<String>) -> SimError {
    SimError::TraceParse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, what: &str, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| perr(line, format!("bad {what} '{tok}'")))
}

fn parse_slot(tok: Option<&str>, line: usize) -> Result<Option<u32>> {
    match tok {
        Some("-") => Ok(None),
        other => num(other, "slot", line).map(Some),
    }
}

pub fn parse_event(text: &str, line: usize) -> Result<TraceEvent> {
    let mut toks = text.split(' ');
    let time: Millis = num(toks.next(), "time", line)?;
    let verb = toks.next().ok_or_else(|| perr(line, "missing event kind"))?;
    let event = match verb {
        "alloc" => {
            let thread = num(toks.next(), "thread", line)?;
            let id = ObjectId(num(toks.next(), "object id", line)?);
            let kind_tok = toks.next().ok_or_else(|| perr(line, "missing kind"))?;
            let kind = ObjectKind::parse(kind_tok).ok_or_else(|| perr(line, format!("unknown kind '{kind_tok}'")))?;
            let size = num(toks.next(), "size", line)?;
            let refs = toks
                .by_ref()
                .map(|t| num(Some(t), "reference", line).map(ObjectId))
                .collect::<Result<Vec<_>>>()?;
            TraceEvent::Alloc {
                time,
                thread,
                id,
                kind,
                size,
                refs,
            }
        }
        "kill" => TraceEvent::Kill {
            time,
            id: ObjectId(num(toks.next(), "object id", line)?),
        },
        "read" | "write" => {
            let thread = num(toks.next(), "thread", line)?;
            let id = ObjectId(num(toks.next(), "object id", line)?);
            let slot = parse_slot(toks.next(), line)?;
            if verb == "read" {
                TraceEvent::Read { time, thread, id, slot }
            } else {
                TraceEvent::Write { time, thread, id, slot }
            }
        }
        "push" => TraceEvent::Push {
            time,
            thread: num(toks.next(), "thread", line)?,
            tag: num(toks.next(), "tag", line)?,
        },
        "pop" => TraceEvent::Pop {
            time,
            thread: num(toks.next(), "thread", line)?,
        },
        other => return Err(perr(line, format!("unknown event '{other}'"))),
    };
    if let Some(extra) = toks.next() {
        return Err(perr(line, format!("unexpected field '{extra}'")));
    }
    Ok(event)
}

/// A parsed trace, replayable tick by tick.
#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub header: TraceHeader,
    pub truth: GroundTruth,
    events: Vec<TraceEvent>,
    cursor: usize,
}

impl Replay {
    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// Events stamped `now`. Ticks must be requested in increasing order.
    pub fn step(&mut self, now: Millis) -> Vec<TraceEvent> {
        let start = self.cursor;
        while self.cursor < self.events.len() && self.events[self.cursor].time() <= now {
            self.cursor += 1;
        }
        self.events[start..self.cursor].to_vec()
    }
}

pub fn read_trace<R: BufRead>(source: R) -> Result<Replay> {
    let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, l)) => Ok((n, l?)),
            None => Err(perr(0, format!("truncated trace: missing {what}"))),
        }
    };
    let (n, magic) = next("header")?;
    if magic.trim_end() != MAGIC {
        return Err(perr(n, format!("expected '{MAGIC}'")));
    }
    let (n, dims) = next("dimensions")?;
    let f: Vec<&str> = dims.split(' ').collect();
    if f.len() != 6 || f[0] != "threads" || f[2] != "fanout" || f[4] != "duration" {
        return Err(perr(n, "expected 'threads <n> fanout <n> duration <ms>'"));
    }
    let header = TraceHeader {
        threads: num(Some(f[1]), "thread count", n)?,
        fanout: num(Some(f[3]), "fanout", n)?,
        duration_ms: num(Some(f[5]), "duration", n)?,
    };
    if header.threads == 0 || header.fanout == 0 {
        return Err(perr(n, "threads and fanout must be positive"));
    }

    let mut truth = GroundTruth::default();
    let mut events = Vec::new();
    let mut last_time = 0;
    loop {
        let (n, text) = next("end footer")?;
        if let Some(rest) = text.strip_prefix("truth ") {
            let mut toks = rest.split(' ').filter(|t| !t.is_empty());
            let set = match toks.next() {
                Some("cold") => &mut truth.cold_ids,
                Some("hot") => &mut truth.hot_ids,
                _ => return Err(perr(n, "expected 'truth cold' or 'truth hot'")),
            };
            for t in toks {
                set.insert(ObjectId(num(Some(t), "object id", n)?));
            }
            continue;
        }
        if let Some(rest) = text.strip_prefix("end ") {
            let count: usize = num(Some(rest), "event count", n)?;
            if count != events.len() {
                return Err(perr(n, format!("footer says {count} events, found {}", events.len())));
            }
            if let Some((n, extra)) = lines.next() {
                if !extra?.trim().is_empty() {
                    return Err(perr(n, "content after end footer"));
                }
            }
            break;
        }
        let e = parse_event(&text, n)?;
        if e.time() < last_time {
            return Err(perr(n, "event times must not decrease"));
        }
        if let TraceEvent::Read { thread, .. }
        | TraceEvent::Write { thread, .. }
        | TraceEvent::Alloc { thread, .. }
        | TraceEvent::Push { thread, .. }
        | TraceEvent::Pop { thread, .. } = &e
        {
            if *thread >= header.threads {
                return Err(perr(n, format!("thread {thread} out of range")));
            }
        }
        if let TraceEvent::Read { slot: Some(s), .. } | TraceEvent::Write { slot: Some(s), .. } = &e {
            if *s >= header.fanout {
                return Err(perr(n, format!("slot {s} out of range")));
            }
        }
        last_time = e.time();
        events.push(e);
    }
    Ok(Replay {
        header,
        truth,
        events,
        cursor: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "coldtrace v1
threads 2 fanout 4 duration 10
truth cold 0 1
truth hot 2
0 push 0 1
0 alloc 0 0 leaf 32
0 alloc 1 2 internal 48 0 1
3 write 1 2 0
5 read 0 2 -
7 kill 2
8 pop 0
end 7
";

    #[test]
    fn fixture_parses() {
        let r = read_trace(FIXTURE.as_bytes()).unwrap();
        assert_eq!(
            r.header,
            TraceHeader {
                threads: 2,
                fanout: 4,
                duration_ms: 10
            }
        );
        assert_eq!(r.events().len(), 7);
        assert_eq!(r.truth.cold_ids.len(), 2);
        assert_eq!(
            r.events()[2],
            TraceEvent::Alloc {
                time: 0,
                thread: 1,
                id: ObjectId(2),
                kind: ObjectKind::Internal,
                size: 48,
                refs: vec![ObjectId(0), ObjectId(1)]
            }
        );
    }

    #[test]
    fn round_trip() {
        let r = read_trace(FIXTURE.as_bytes()).unwrap();
        let mut w = TraceWriter::new(Vec::new(), &r.header, &r.truth).unwrap();
        for e in r.events() {
            w.event(e).unwrap();
        }
        let bytes = w.finish().unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), FIXTURE);
    }

    #[test]
    fn step_groups_by_tick() {
        let mut r = read_trace(FIXTURE.as_bytes()).unwrap();
        assert_eq!(r.step(0).len(), 3);
        assert_eq!(r.step(1).len(), 0);
        assert_eq!(r.step(5).len(), 2);
        assert_eq!(r.step(10).len(), 2);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let cut: String = FIXTURE.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_trace(cut.as_bytes()), Err(SimError::TraceParse { .. })));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = FIXTURE.replace("5 read 0 2 -", "5 read 0 x -");
        match read_trace(bad.as_bytes()) {
            Err(SimError::TraceParse { line, .. }) => assert_eq!(line, 9),
            other => panic!("unexpected {other:?}"),
        }
        let bad = FIXTURE.replace("7 kill 2", "4 kill 2");
        assert!(matches!(
            read_trace(bad.as_bytes()),
            Err(SimError::TraceParse { line: 10, .. })
        ));
        let bad = FIXTURE.replace("end 7", "end 6");
        assert!(matches!(
            read_trace(bad.as_bytes()),
            Err(SimError::TraceParse { line: 12, .. })
        ));
        let bad = FIXTURE.replace("0 alloc 0 0 leaf 32", "0 alloc 0 0 blob 32");
        assert!(matches!(
            read_trace(bad.as_bytes()),
            Err(SimError::TraceParse { line: 6, .. })
        ));
    }
}
