use std::fmt;
use std::io::{BufRead, Write};

use crate::{Error, Result};

/// Marker attached to a branch row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BifFlag {
    #[default]
    None,
    /// Bifurcation point (change of stability index).
    Bp,
    /// Fold in the active parameter.
    Fp,
    /// Row written right after a mesh adaptation.
    Adapt,
}

impl BifFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BifFlag::None => "",
            BifFlag::Bp => "BP",
            BifFlag::Fp => "FP",
            BifFlag::Adapt => "ADAPT",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "" => Ok(BifFlag::None),
            "BP" => Ok(BifFlag::Bp),
            "FP" => Ok(BifFlag::Fp),
            "ADAPT" => Ok(BifFlag::Adapt),
            other => Err(Error::Argument(format!("unknown branch flag '{other}'"))),
        }
    }
}

impl fmt::Display for BifFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub step_index: usize,
    pub param_name: String,
    pub param_value: f64,
    pub l2_norm: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub np: usize,
    /// `None` when the inertia computation failed.
    pub n_neg: Option<usize>,
    pub flag: BifFlag,
}

pub const BRANCH_HEADER: &str = "step,param_name,param_value,l2,min_u,max_u,np,n_neg,flag";

impl BranchRecord {
    /// CSV row with round-trip float formatting; an unknown stability index
    /// is written as `-1`.
    pub fn csv_row(&self) -> String {
        let n_neg = self.n_neg.map_or("-1".to_string(), |n| n.to_string());
        format!(
            "{},{},{:e},{:e},{:e},{:e},{},{},{}",
            self.step_index, self.param_name, self.param_value, self.l2_norm, self.min_u, self.max_u, self.np, n_neg, self.flag
        )
    }
}

pub fn write_branch_header<W: Write>(w: &mut W) -> Result<()> {
    writeln!(w, "{BRANCH_HEADER}")?;
    Ok(())
}

pub fn write_branch_csv<W: Write>(records: &[BranchRecord], w: &mut W) -> Result<()> {
    write_branch_header(w)?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn read_branch_csv<R: BufRead>(r: R) -> Result<Vec<BranchRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim() != BRANCH_HEADER {
                return Err(Error::Parse { line: 1, msg: format!("expected header '{BRANCH_HEADER}'") });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Parse { line: lineno, msg: format!("expected 9 fields, found {}", f.len()) });
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Parse { line: lineno, msg: format!("bad number '{s}'") })
        };
        let int = |s: &str| -> Result<i64> {
            s.trim().parse().map_err(|_| Error::Parse { line: lineno, msg: format!("bad integer '{s}'") })
        };
        let n_neg = int(f[7])?;
        out.push(BranchRecord {
            step_index: int(f[0])?.max(0) as usize,
            param_name: f[1].to_string(),
            param_value: num(f[2])?,
            l2_norm: num(f[3])?,
            min_u: num(f[4])?,
            max_u: num(f[5])?,
            np: int(f[6])?.max(0) as usize,
            n_neg: (n_neg >= 0).then_some(n_neg as usize),
            flag: BifFlag::parse(f[8].trim()).map_err(|e| Error::Parse { line: lineno, msg: e.to_string() })?,
        });
    }
    Ok(out)
}
