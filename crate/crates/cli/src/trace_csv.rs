//! Trace CSV files: a `#` comment block followed by one row per iterate.

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context, Result};
use dfs_core::{IterateTrace, TraceRecord};

pub const COLUMNS: [&str; 6] = ["k", "proximity", "target", "gamma_consumed", "probes_accepted", "probes_rejected"];

/// Writes `trace`, prefixing every line of `header` with `# `. A `psi`
/// column is added when any record carries one.
pub fn write_trace<W: Write>(mut out: W, header: &str, trace: &IterateTrace) -> Result<()> {
    for line in header.lines() {
        writeln!(out, "# {line}")?;
    }
    let with_psi = trace.records().iter().any(|r| r.psi.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut columns: Vec<&str> = COLUMNS.to_vec();
    if with_psi {
        columns.push("psi");
    }
    w.write_record(&columns)?;
    for r in trace.records() {
        let mut row = vec![
            r.k.to_string(),
            r.proximity.to_string(),
            r.target.to_string(),
            r.gamma_consumed.to_string(),
            r.probes_accepted.to_string(),
            r.probes_rejected.to_string(),
        ];
        if with_psi {
            row.push(r.psi.map_or_else(String::new, |p| p.to_string()));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace`]. Only `k`, `proximity` and
/// `target` are required; other columns default to zero.
pub fn read_trace<R: Read>(input: R) -> Result<IterateTrace> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (k, prox, target) = match (col("k"), col("proximity"), col("target")) {
        (Some(k), Some(p), Some(t)) => (k, p, t),
        _ => bail!("trace needs k, proximity and target columns"),
    };
    let (gamma, acc, rej, psi) = (col("gamma_consumed"), col("probes_accepted"), col("probes_rejected"), col("psi"));

    let mut records = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(i + 2, |p| p.line() as usize);
        let field = |c: usize| row.get(c).ok_or_else(|| anyhow!("line {line}: missing column {c}"));
        let num = |c: usize| -> Result<f64> {
            let s = field(c)?;
            s.parse().with_context(|| format!("line {line}: bad number `{s}`"))
        };
        let count = |c: Option<usize>| -> Result<u64> {
            match c {
                Some(c) => {
                    let s = field(c)?;
                    s.parse().with_context(|| format!("line {line}: bad count `{s}`"))
                }
                None => Ok(0),
            }
        };
        let kv = field(k)?;
        let mut rec = TraceRecord::new(
            kv.parse().with_context(|| format!("line {line}: bad index `{kv}`"))?,
            num(prox)?,
            num(target)?,
        );
        if let Some(g) = gamma {
            rec.gamma_consumed = num(g)?;
        }
        rec.probes_accepted = count(acc)?;
        rec.probes_rejected = count(rej)?;
        if let Some(p) = psi {
            if !field(p)?.is_empty() {
                rec.psi = Some(num(p)?);
            }
        }
        records.push(rec);
    }
    Ok(IterateTrace::from_records(records)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_trace() {
        let text = "# made by hand\nk,proximity,target\n0,10,5\n1,5,3\n2,2,2\n";
        let t = read_trace(text.as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.records()[1].proximity, 5.0);
        assert_eq!(t.records()[2].target, 2.0);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(read_trace("k,proximity\n0,1\n".as_bytes()).is_err());
        assert!(read_trace("k,proximity,target\n0,x,1\n".as_bytes()).is_err());
        assert!(read_trace("k,proximity,target\n1,1,1\n".as_bytes()).is_err());
        assert!(read_trace("k,proximity,target\n0,2,1\n0,1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn psi_column_round_trips() {
        let mut records = Vec::new();
        for k in 0..4 {
            let mut r = TraceRecord::new(k, 1.0 / (k as f64 + 3.0), 0.1 * k as f64);
            r.psi = Some(r.proximity + r.target);
            r.gamma_consumed = 0.02 * 0.99f64.powi(k as i32);
            r.probes_accepted = k as u64;
            records.push(r);
        }
        let t = IterateTrace::from_records(records).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, "mode = ep\neta = 1", &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# mode = ep\n# eta = 1\nk,proximity,"));
        assert_eq!(read_trace(buf.as_slice()).unwrap(), t);
    }
}
