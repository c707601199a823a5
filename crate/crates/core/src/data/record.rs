use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// One raw engagement event.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRecord {
    pub user_id: String,
    pub item_id: String,
    pub timestamp: i64,
    /// Watch time in seconds.
    pub watch_time: Option<f64>,
    /// Play-through ratio (1.0 = watched once).
    pub loop_times: Option<f64>,
    /// Satisfaction interactions such as `like`, `comment`, `favorite`, `share`.
    pub flags: BTreeSet<String>,
}

impl InteractionRecord {
    pub fn new(user_id: impl Into<String>, item_id: impl Into<String>, timestamp: i64) -> Self {
        Self {
            user_id: user_id.into(),
            item_id: item_id.into(),
            timestamp,
            watch_time: None,
            loop_times: None,
            flags: BTreeSet::new(),
        }
    }

    pub fn with_watch_time(mut self, secs: f64) -> Self {
        self.watch_time = Some(secs);
        self
    }

    pub fn with_loop_times(mut self, ratio: f64) -> Self {
        self.loop_times = Some(ratio);
        self
    }

    pub fn with_flag(mut self, flag: impl Into<String>) -> Self {
        self.flags.insert(flag.into());
        self
    }
}

/// Disjunction of engagement thresholds deciding whether an interaction is
/// positive. Every enabled clause is tested with a strict inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterRule {
    /// Flags that count as satisfaction. `Some(empty)` accepts any flag.
    satisfaction: Option<BTreeSet<String>>,
    loop_above: Option<f64>,
    watch_above: Option<f64>,
}

impl FilterRule {
    pub fn new(
        satisfaction: Option<BTreeSet<String>>,
        loop_above: Option<f64>,
        watch_above: Option<f64>,
    ) -> Result<Self> {
        if satisfaction.is_none() && loop_above.is_none() && watch_above.is_none() {
            return Err(Error::Config("filter rule needs at least one clause".into()));
        }
        Ok(Self {
            satisfaction,
            loop_above,
            watch_above,
        })
    }

    /// Any satisfaction flag, loop ratio above 1.1, or more than 45 s watched.
    pub fn wechat() -> Self {
        Self::new(Some(BTreeSet::new()), Some(1.1), Some(45.0)).unwrap()
    }

    /// Loop ratio above 1.0.
    pub fn tiktok_loop() -> Self {
        Self::new(None, Some(1.0), None).unwrap()
    }

    /// Explicit likes only.
    pub fn tiktok_like() -> Self {
        Self::new(Some(["like".to_string()].into()), None, None).unwrap()
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "wechat" => Ok(Self::wechat()),
            "tiktok1" | "tiktok-loop" => Ok(Self::tiktok_loop()),
            "tiktok2" | "tiktok-like" => Ok(Self::tiktok_like()),
            "any-flag" => Self::new(Some(BTreeSet::new()), None, None),
            other => Err(Error::Config(format!("unknown filter preset `{other}`"))),
        }
    }

    pub fn accepts(&self, r: &InteractionRecord) -> bool {
        let satisfied = match &self.satisfaction {
            Some(wanted) if wanted.is_empty() => !r.flags.is_empty(),
            Some(wanted) => r.flags.iter().any(|f| wanted.contains(f)),
            None => false,
        };
        let looped = matches!((self.loop_above, r.loop_times), (Some(t), Some(v)) if v > t);
        let watched = matches!((self.watch_above, r.watch_time), (Some(t), Some(v)) if v > t);
        satisfied || looped || watched
    }
}

/// Keeps the records accepted by `rule`, in input order.
pub fn filter_positive(log: &[InteractionRecord], rule: &FilterRule) -> Vec<InteractionRecord> {
    log.iter().filter(|r| rule.accepts(r)).cloned().collect()
}

fn parse_optional(field: Option<&str>, line: usize, name: &str) -> Result<Option<f64>> {
    match field.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::Data(format!("line {line}: bad {name} `{s}`"))),
    }
}

/// Reads delimiter-separated records:
/// `user, item, timestamp[, watch_time[, loop_times[, flags]]]` where flags are
/// `;`-separated. A first line whose timestamp column is not an integer is
/// taken as a header and skipped.
pub fn read_log(reader: impl BufRead, delimiter: char) -> Result<Vec<InteractionRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delimiter).collect();
        if fields.len() < 3 {
            return Err(Error::Data(format!(
                "line {lineno}: expected at least 3 fields, found {}",
                fields.len()
            )));
        }
        let timestamp = match fields[2].trim().parse::<i64>() {
            Ok(t) => t,
            Err(_) if n == 0 => continue,
            Err(_) => {
                return Err(Error::Data(format!(
                    "line {lineno}: bad timestamp `{}`",
                    fields[2]
                )))
            }
        };
        let mut record = InteractionRecord::new(fields[0].trim(), fields[1].trim(), timestamp);
        record.watch_time = parse_optional(fields.get(3).copied(), lineno, "watch_time")?;
        record.loop_times = parse_optional(fields.get(4).copied(), lineno, "loop_times")?;
        if let Some(flags) = fields.get(5) {
            record.flags = flags
                .split(';')
                .map(str::trim)
                .filter(|f| !f.is_empty())
                .map(String::from)
                .collect();
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_log(mut w: impl Write, log: &[InteractionRecord], delimiter: char) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in log {
        let flags: Vec<&str> = r.flags.iter().map(String::as_str).collect();
        writeln!(
            w,
            "{u}{d}{i}{d}{t}{d}{wt}{d}{lt}{d}{f}",
            u = r.user_id,
            i = r.item_id,
            t = r.timestamp,
            wt = opt(r.watch_time),
            lt = opt(r.loop_times),
            f = flags.join(";"),
            d = delimiter
        )?;
    }
    Ok(())
}
