//! Result tables.
//!
//! Floats are written in their shortest round-trip form, positional for
//! `1e-4 ≤ |x| < 1e15` and scientific otherwise, so every row parses back to
//! the same bits. Fields that do not apply (the `d` of a theory row, a missing
//! standard error) are left empty.

use std::fmt;
use std::str::FromStr;

use dsmrf::theory::Regime;

use crate::error::{CliError, Result};

/// Column order of every learning-curve table.
pub const HEADER: [&str; 18] = [
    "regime",
    "t",
    "psi_n",
    "psi_p",
    "psi_D",
    "lambda",
    "m",
    "d",
    "eps_test_par",
    "eps_test_perp",
    "eps_test_total",
    "eps_train",
    "std_err_test",
    "std_err_train",
    "solver_residual",
    "status",
    "seed",
    "message",
];

pub fn format_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowKind {
    TheoryMinf,
    TheoryM1,
    Mc,
}

impl RowKind {
    pub fn name(self) -> &'static str {
        match self {
            RowKind::TheoryMinf => "theory_minf",
            RowKind::TheoryM1 => "theory_m1",
            RowKind::Mc => "mc",
        }
    }
}

impl From<Regime> for RowKind {
    fn from(r: Regime) -> Self {
        match r {
            Regime::MInf => RowKind::TheoryMinf,
            Regime::M1 => RowKind::TheoryM1,
        }
    }
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RowKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "theory_minf" => Ok(RowKind::TheoryMinf),
            "theory_m1" => Ok(RowKind::TheoryM1),
            "mc" => Ok(RowKind::Mc),
            _ => Err(format!("unknown regime '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Ok,
    SolverFailure,
    NumericError,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::SolverFailure => "solver_failure",
            Status::NumericError => "numeric_error",
        }
    }

    pub fn of(e: &dsmrf::Error) -> Self {
        match e {
            dsmrf::Error::SolverFailure { .. } => Status::SolverFailure,
            _ => Status::NumericError,
        }
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ok" => Ok(Status::Ok),
            "solver_failure" => Ok(Status::SolverFailure),
            "numeric_error" => Ok(Status::NumericError),
            _ => Err(format!("unknown status '{s}'")),
        }
    }
}

/// Noise draws per data point; `Inf` for the `m = ∞` theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Draws {
    Finite(usize),
    Inf,
}

impl fmt::Display for Draws {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Draws::Finite(m) => write!(f, "{m}"),
            Draws::Inf => f.write_str("inf"),
        }
    }
}

impl FromStr for Draws {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "inf" {
            return Ok(Draws::Inf);
        }
        s.parse().map(Draws::Finite).map_err(|_| format!("bad m '{s}'"))
    }
}

/// One evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub regime: RowKind,
    pub t: f64,
    pub psi_n: f64,
    pub psi_p: f64,
    pub psi_d: f64,
    pub lambda: f64,
    pub m: Draws,
    pub d: Option<usize>,
    pub eps_test_par: f64,
    pub eps_test_perp: f64,
    pub eps_test_total: f64,
    pub eps_train: f64,
    pub std_err_test: Option<f64>,
    pub std_err_train: Option<f64>,
    pub solver_residual: Option<f64>,
    pub status: Status,
    pub seed: Option<u64>,
    pub message: String,
}

impl ResultRow {
    /// A row for a point that failed; metrics are NaN.
    pub fn failed(mut self, err: &dsmrf::Error) -> Self {
        self.eps_test_par = f64::NAN;
        self.eps_test_perp = f64::NAN;
        self.eps_test_total = f64::NAN;
        self.eps_train = f64::NAN;
        self.std_err_test = self.std_err_test.map(|_| f64::NAN);
        self.std_err_train = self.std_err_train.map(|_| f64::NAN);
        self.solver_residual = self.solver_residual.map(|_| f64::NAN);
        self.status = Status::of(err);
        self.message = err.to_string();
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    fn record(&self) -> [String; 18] {
        [
            self.regime.to_string(),
            format_f64(self.t),
            format_f64(self.psi_n),
            format_f64(self.psi_p),
            format_f64(self.psi_d),
            format_f64(self.lambda),
            self.m.to_string(),
            self.d.map(|d| d.to_string()).unwrap_or_default(),
            format_f64(self.eps_test_par),
            format_f64(self.eps_test_perp),
            format_f64(self.eps_test_total),
            format_f64(self.eps_train),
            format_opt(self.std_err_test),
            format_opt(self.std_err_train),
            format_opt(self.solver_residual),
            self.status.name().to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.message.clone(),
        ]
    }

    fn from_record(r: &csv::StringRecord) -> std::result::Result<Self, String> {
        if r.len() != HEADER.len() {
            return Err(format!("expected {} fields, got {}", HEADER.len(), r.len()));
        }
        let f = |i: usize| r[i].parse::<f64>().map_err(|_| format!("{}: bad number '{}'", HEADER[i], &r[i]));
        let opt = |i: usize| if r[i].is_empty() { Ok(None) } else { f(i).map(Some) };
        Ok(ResultRow {
            regime: r[0].parse()?,
            t: f(1)?,
            psi_n: f(2)?,
            psi_p: f(3)?,
            psi_d: f(4)?,
            lambda: f(5)?,
            m: r[6].parse()?,
            d: if r[7].is_empty() { None } else { Some(r[7].parse().map_err(|_| format!("bad d '{}'", &r[7]))?) },
            eps_test_par: f(8)?,
            eps_test_perp: f(9)?,
            eps_test_total: f(10)?,
            eps_train: f(11)?,
            std_err_test: opt(12)?,
            std_err_train: opt(13)?,
            solver_residual: opt(14)?,
            status: r[15].parse()?,
            seed: if r[16].is_empty() { None } else { Some(r[16].parse().map_err(|_| format!("bad seed '{}'", &r[16]))?) },
            message: r[17].to_string(),
        })
    }
}

/// Writes any table with a fixed header.
pub fn write_table<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_rows(rows: &[ResultRow]) -> Result<String> {
    write_table(&HEADER, rows.iter().map(|r| r.record()))
}

/// Reads a table back, checking its header.
pub fn read_table(text: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let got = rd.headers()?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(CliError::InvalidArgument(format!("unexpected header '{}'", got.iter().collect::<Vec<_>>().join(","))));
    }
    rd.records().map(|r| r.map_err(CliError::from)).collect()
}

pub fn read_rows(text: &str) -> Result<Vec<ResultRow>> {
    read_table(text, &HEADER)?
        .iter()
        .enumerate()
        .map(|(i, r)| ResultRow::from_record(r).map_err(|e| CliError::InvalidArgument(format!("row {}: {e}", i + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultRow {
        ResultRow {
            regime: RowKind::Mc,
            t: 0.01,
            psi_n: 20.0,
            psi_p: 2.0,
            psi_d: 1.0,
            lambda: 1e-3,
            m: Draws::Finite(100),
            d: Some(100),
            eps_test_par: 0.123,
            eps_test_perp: 0.0,
            eps_test_total: 0.123,
            eps_train: 1.5e-7,
            std_err_test: Some(2e-3),
            std_err_train: None,
            solver_residual: None,
            status: Status::Ok,
            seed: Some(3),
            message: String::new(),
        }
    }

    #[test]
    fn float_format() {
        assert_eq!(format_f64(0.1), "0.1");
        assert_eq!(format_f64(1e-5), "1e-5");
        assert_eq!(format_f64(1e-4), "0.0001");
        assert_eq!(format_f64(-2.5e20), "-2.5e20");
        assert_eq!(format_f64(0.0), "0");
        assert_eq!(format_f64(f64::NAN), "NaN");
        assert_eq!(format_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn header_line() {
        let text = write_rows(&[]).unwrap();
        assert_eq!(
            text,
            "regime,t,psi_n,psi_p,psi_D,lambda,m,d,eps_test_par,eps_test_perp,eps_test_total,eps_train,\
             std_err_test,std_err_train,solver_residual,status,seed,message\n"
        );
    }

    #[test]
    fn round_trip_with_awkward_message() {
        let mut r = sample();
        r.message = "a, \"quoted\"\nline".into();
        let back = read_rows(&write_rows(&[r.clone()]).unwrap()).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn failed_rows_carry_nan() {
        let err = dsmrf::Error::SolverFailure { reason: "stalled".into(), residual: 1.0, lambda: 1e-3 };
        let r = sample().failed(&err);
        assert_eq!(r.status, Status::SolverFailure);
        assert!(r.eps_test_total.is_nan() && r.eps_train.is_nan());
        assert!(r.message.contains("stalled"));
        let back = read_rows(&write_rows(&[r]).unwrap()).unwrap();
        assert!(back[0].eps_test_total.is_nan());
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_rows("regime,t\nmc,1\n").is_err());
    }
}
