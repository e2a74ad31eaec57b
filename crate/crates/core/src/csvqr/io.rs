//! Plain-text model files.
//!
//! ```text
//! CSVQR-MODEL 1
//! levels <M> <tau_1> ... <tau_M>
//! kernel rbf <sigma>          | kernel linear
//! c <C>
//! tol <tol>
//! max_iter <sweeps>
//! clamp <true|false>
//! status <converged:true|false> <sweeps> <kkt>
//! scaler none                 | scaler <p> followed by a "min" row and a "max" row
//! support <N> <p>             followed by N rows of p values
//! alpha_plus <M> <N>          followed by M rows
//! alpha_minus <M> <N>         followed by M rows
//! lambda <M-1> <N>            followed by M-1 rows
//! end
//! ```
//!
//! Values are whitespace-separated and printed in shortest round-trip form,
//! so a write/read cycle reproduces the model bit for bit.

use std::io::{BufRead, BufReader, Read, Write};

use ndarray::{Array1, Array2};

use super::{CsvqrConfig, CsvqrModel, DualSolution, QuantileLevels, SolveStatus};
use crate::dataset::MinMaxScaler;
use crate::kernels::KernelSpec;
use crate::{Error, Result};

pub const MODEL_MAGIC: &str = "CSVQR-MODEL";
const VERSION: u32 = 1;

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_matrix<W: Write>(w: &mut W, name: &str, m: &Array2<f64>) -> Result<()> {
    writeln!(w, "{name} {} {}", m.nrows(), m.ncols())?;
    for row in m.rows() {
        writeln!(w, "{}", join(row.iter().copied()))?;
    }
    Ok(())
}

pub fn write_model<W: Write>(mut w: W, model: &CsvqrModel) -> Result<()> {
    writeln!(w, "{MODEL_MAGIC} {VERSION}")?;
    let levels = model.levels.as_slice();
    writeln!(
        w,
        "levels {} {}",
        levels.len(),
        join(levels.iter().copied())
    )?;
    match model.config.kernel {
        KernelSpec::Rbf { sigma } => writeln!(w, "kernel rbf {sigma:?}")?,
        KernelSpec::Linear => writeln!(w, "kernel linear")?,
    }
    writeln!(w, "c {:?}", model.config.c)?;
    writeln!(w, "tol {:?}", model.config.tol)?;
    writeln!(w, "max_iter {}", model.config.max_iter)?;
    writeln!(w, "clamp {}", model.config.clamp)?;
    writeln!(
        w,
        "status {} {} {:?}",
        model.status.converged, model.status.sweeps, model.status.kkt
    )?;
    match &model.scaler {
        None => writeln!(w, "scaler none")?,
        Some(s) => {
            writeln!(w, "scaler {}", s.n_features())?;
            writeln!(w, "min {}", join(s.mins.iter().copied()))?;
            writeln!(w, "max {}", join(s.maxs.iter().copied()))?;
        }
    }
    write_matrix(&mut w, "support", &model.support)?;
    write_matrix(&mut w, "alpha_plus", &model.dual.alpha_plus)?;
    write_matrix(&mut w, "alpha_minus", &model.dual.alpha_minus)?;
    write_matrix(&mut w, "lambda", &model.dual.lambda)?;
    writeln!(w, "end")?;
    w.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    line_no: usize,
}

impl<R: Read> Lines<R> {
    fn next_tokens(&mut self) -> Result<Vec<String>> {
        loop {
            let line = self.inner.next().ok_or_else(|| {
                Error::ModelFormat(format!(
                    "unexpected end of file after line {}",
                    self.line_no
                ))
            })??;
            self.line_no += 1;
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                return Ok(trimmed.split_whitespace().map(str::to_owned).collect());
            }
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::ModelFormat(format!("line {}: {msg}", self.line_no))
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let mut t = self.next_tokens()?;
        if t.first().map(String::as_str) != Some(key) {
            return Err(self.err(format!("expected {key:?}, found {:?}", t.first())));
        }
        t.remove(0);
        Ok(t)
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse::<T>()
            .map_err(|_| self.err(format!("cannot parse {s:?}")))
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let t = self.keyed(key)?;
        match t.as_slice() {
            [v] => self.num(v),
            _ => Err(self.err(format!("{key} takes one value"))),
        }
    }

    fn floats(&self, tokens: &[String], expected: usize) -> Result<Vec<f64>> {
        if tokens.len() != expected {
            return Err(self.err(format!(
                "expected {expected} values, found {}",
                tokens.len()
            )));
        }
        tokens.iter().map(|t| self.num::<f64>(t)).collect()
    }

    fn matrix(&mut self, key: &str, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let header = self.keyed(key)?;
        let dims: Vec<usize> = header.iter().map(|t| self.num(t)).collect::<Result<_>>()?;
        if dims != [rows, cols] {
            return Err(self.err(format!(
                "{key} has shape {dims:?}, expected [{rows}, {cols}]"
            )));
        }
        let mut m = Array2::zeros((rows, cols));
        for r in 0..rows {
            let t = self.next_tokens()?;
            let vals = self.floats(&t, cols)?;
            for (c, v) in vals.into_iter().enumerate() {
                m[[r, c]] = v;
            }
        }
        Ok(m)
    }
}

pub fn read_model<R: Read>(r: R) -> Result<CsvqrModel> {
    let mut lines = Lines {
        inner: BufReader::new(r).lines(),
        line_no: 0,
    };
    let magic = lines.next_tokens()?;
    if magic.len() != 2 || magic[0] != MODEL_MAGIC {
        return Err(Error::ModelFormat("not a model file".into()));
    }
    let version: u32 = lines.num(&magic[1])?;
    if version != VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }

    let t = lines.keyed("levels")?;
    let m_levels: usize = lines.num(t.first().ok_or_else(|| lines.err("missing level count"))?)?;
    let levels = QuantileLevels::new(lines.floats(&t[1..], m_levels)?)?;

    let t = lines.keyed("kernel")?;
    let kernel = match t.as_slice() {
        [kind, sigma] if kind == "rbf" => KernelSpec::rbf(lines.num(sigma)?)?,
        [kind] if kind == "linear" => KernelSpec::Linear,
        _ => return Err(lines.err(format!("bad kernel line {t:?}"))),
    };
    let c: f64 = lines.scalar("c")?;
    let tol: f64 = lines.scalar("tol")?;
    let max_iter: usize = lines.scalar("max_iter")?;
    let clamp: bool = lines.scalar("clamp")?;
    let config = CsvqrConfig {
        c,
        kernel,
        tol,
        max_iter,
        clamp,
    };
    config.validate()?;

    let t = lines.keyed("status")?;
    if t.len() != 3 {
        return Err(lines.err("status takes three values"));
    }
    let status = SolveStatus {
        converged: lines.num(&t[0])?,
        sweeps: lines.num(&t[1])?,
        kkt: lines.num(&t[2])?,
    };

    let t = lines.keyed("scaler")?;
    let scaler = match t.as_slice() {
        [none] if none == "none" => None,
        [p] => {
            let p: usize = lines.num(p)?;
            let mins = lines.keyed("min")?;
            let mins = Array1::from(lines.floats(&mins, p)?);
            let maxs = lines.keyed("max")?;
            let maxs = Array1::from(lines.floats(&maxs, p)?);
            Some(MinMaxScaler { mins, maxs })
        }
        _ => return Err(lines.err("bad scaler line")),
    };

    let header = lines.keyed("support")?;
    if header.len() != 2 {
        return Err(lines.err("support takes two dimensions"));
    }
    let n: usize = lines.num(&header[0])?;
    let p: usize = lines.num(&header[1])?;
    let mut support = Array2::zeros((n, p));
    for r in 0..n {
        let t = lines.next_tokens()?;
        for (c, v) in lines.floats(&t, p)?.into_iter().enumerate() {
            support[[r, c]] = v;
        }
    }
    if let Some(s) = &scaler {
        if s.n_features() != p {
            return Err(lines.err("scaler width differs from support width"));
        }
    }

    let dual = DualSolution {
        alpha_plus: lines.matrix("alpha_plus", m_levels, n)?,
        alpha_minus: lines.matrix("alpha_minus", m_levels, n)?,
        lambda: lines.matrix("lambda", m_levels - 1, n)?,
    };
    lines.keyed("end")?;
    Ok(CsvqrModel::from_parts(
        support, dual, levels, config, scaler, status,
    ))
}
