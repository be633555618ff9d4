//! `trace.csv`: one row per simulation sample.

use std::io::{self, Write};

use setobs::model::PerSide;
use setobs::numerics::RealVector;
use setobs::sim::Sample;

/// Column names for `n` states, `p` outputs and `q` parameters.
///
/// `t`, `x1..xn`, `y1..yp`, `yv1..yvp`, `zeta_m*`, `zeta_M*`, `xi_m*`,
/// `xi_M*`, `theta_hat_m*`, `theta_hat_M*`, `theta_bar_m*`, `theta_bar_M*`,
/// `pe_m`, `pe_M`, `branch`, `s1..sp`, `d1..dq`, `z1..zp`, `S`, `D`, `Z`.
pub fn header(n: usize, p: usize, q: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let mut push =
        |prefix: &str, len: usize| cols.extend((1..=len).map(|i| format!("{prefix}{i}")));
    push("x", n);
    push("y", p);
    push("yv", p);
    for (name, len) in [("zeta", n), ("xi", n), ("theta_hat", q), ("theta_bar", q)] {
        push(&format!("{name}_m"), len);
        push(&format!("{name}_M"), len);
    }
    cols.extend(["pe_m", "pe_M", "branch"].map(String::from));
    let mut push =
        |prefix: &str, len: usize| cols.extend((1..=len).map(|i| format!("{prefix}{i}")));
    push("s", p);
    push("d", q);
    push("z", p);
    cols.extend(["S", "D", "Z"].map(String::from));
    cols
}

pub struct TraceWriter<W: Write> {
    out: W,
    q: usize,
    line: String,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, n: usize, p: usize, q: usize) -> io::Result<Self> {
        writeln!(out, "{}", header(n, p, q).join(","))?;
        Ok(TraceWriter {
            out,
            q,
            line: String::new(),
        })
    }

    pub fn write(&mut self, s: &Sample) -> io::Result<()> {
        use std::fmt::Write as _;
        let line = &mut self.line;
        line.clear();
        num(line, s.t);
        for v in [&s.x, &s.y, &s.y_v] {
            vector(line, Some(v), v.len());
        }
        for pair in [&s.zeta, &s.xi, &s.theta_hat] {
            vector(line, Some(&pair.lower), pair.lower.len());
            vector(line, Some(&pair.upper), pair.upper.len());
        }
        let bar: Option<&PerSide<RealVector>> = s.report.theta_bar_inf.as_ref();
        vector(line, bar.map(|b| &b.lower), self.q);
        vector(line, bar.map(|b| &b.upper), self.q);
        let pe = s.report.pe_ok();
        let _ = write!(
            line,
            ",{},{},{}",
            flag(pe.lower),
            flag(pe.upper),
            s.report.branch_label()
        );
        let ind = &s.indicators;
        flags(line, Some(&ind.s.channels), ind.s.channels.len());
        flags(line, ind.d.as_ref().map(|d| d.channels.as_slice()), self.q);
        flags(line, Some(&ind.z.channels), ind.z.channels.len());
        let d_any = ind.d.as_ref().map(|d| flag(d.any)).unwrap_or("");
        let _ = write!(line, ",{},{},{}", flag(ind.s.any), d_any, flag(ind.z.any));
        line.push('\n');
        self.out.write_all(line.as_bytes())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Seventeen significant digits; round-trips every `f64`.
fn num(line: &mut String, v: f64) {
    use std::fmt::Write as _;
    let _ = write!(line, "{v:.16e}");
}

/// Comma-prefixed entries, or `len` empty fields when unavailable.
fn vector(line: &mut String, v: Option<&RealVector>, len: usize) {
    match v {
        Some(v) => {
            for x in v.iter() {
                line.push(',');
                num(line, *x);
            }
        }
        None => (0..len).for_each(|_| line.push(',')),
    }
}

fn flags(line: &mut String, v: Option<&[bool]>, len: usize) {
    match v {
        Some(v) => {
            for b in v {
                line.push(',');
                line.push_str(flag(*b));
            }
        }
        None => (0..len).for_each(|_| line.push(',')),
    }
}
