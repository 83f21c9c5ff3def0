//! Artifact import/export.
//!
//! CSV schemas:
//!
//! - market: `t,value,market_return` (T+1 rows; the final row has no return)
//! - returns panel: `t,asset_index,expected,realized` (T*N rows)
//! - trajectories: `traj_id,t,kind,asset_index,value` with `kind` in
//!   {state, action}
//! - contributions: `traj_id,t,contribution`
//! - plot data: `t,portfolio_value,benchmark,contribution,step_return`
//!
//! JSON documents all carry `schema_version` (currently 1); matrices are
//! stored as row-major flat arrays. Floats are written in Rust's shortest
//! round-trip representation, so re-importing reproduces values exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::girl::FitReport;
use crate::glearner::{FCoeffs, GCoeffs, PolicySolution, Trajectory};
use crate::market::{AssetUniverse, MarketPath, ReturnsPanel};
use crate::reward::RewardParams;

pub const SCHEMA_VERSION: u32 = 1;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::io(path.display().to_string(), e)
    })?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| {
        Error::io(path.display().to_string(), e)
    })?))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("bad {field}: {raw:?}")))
}

fn parse_usize(path: &Path, line: usize, field: &str, raw: &str) -> Result<usize> {
    raw.parse::<usize>()
        .map_err(|_| parse_err(path, line, format!("bad {field}: {raw:?}")))
}

// ---------------------------------------------------------------------------
// generic JSON
// ---------------------------------------------------------------------------

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, doc)
        .map_err(|e| Error::Numeric(format!("JSON serialization failed: {e}")))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = open(path)?;
    serde_json::from_reader(r).map_err(|e| parse_err(path, e.line(), e.to_string()))
}

// ---------------------------------------------------------------------------
// matrices
// ---------------------------------------------------------------------------

/// Row-major dense matrix for JSON documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixDoc {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Shape(format!(
                "matrix document claims {}x{} but holds {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

// ---------------------------------------------------------------------------
// market + returns CSV
// ---------------------------------------------------------------------------

pub fn write_market_csv(path: &Path, market: &MarketPath) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "t,value,market_return").map_err(io_err)?;
    for (t, value) in market.values.iter().enumerate() {
        if t < market.returns.len() {
            writeln!(w, "{t},{value},{}", market.returns[t]).map_err(io_err)?;
        } else {
            writeln!(w, "{t},{value},").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_market_csv(path: &Path) -> Result<MarketPath> {
    let r = open(path)?;
    let mut values = Vec::new();
    let mut returns = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if idx == 0 {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(parse_err(path, idx + 1, "expected 3 columns"));
        }
        values.push(parse_f64(path, idx + 1, "value", parts[1])?);
        if !parts[2].is_empty() {
            returns.push(parse_f64(path, idx + 1, "market_return", parts[2])?);
        }
    }
    if values.len() != returns.len() + 1 {
        return Err(parse_err(path, 1, "value/return row counts are inconsistent"));
    }
    Ok(MarketPath { values, returns })
}

pub fn write_returns_csv(path: &Path, panel: &ReturnsPanel) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "t,asset_index,expected,realized").map_err(io_err)?;
    for t in 0..panel.num_steps() {
        for i in 0..panel.num_assets() {
            writeln!(w, "{t},{i},{},{}", panel.expected[(t, i)], panel.realized[(t, i)])
                .map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_returns_csv(path: &Path) -> Result<ReturnsPanel> {
    let r = open(path)?;
    let mut rows: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if idx == 0 {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(parse_err(path, idx + 1, "expected 4 columns"));
        }
        rows.push((
            parse_usize(path, idx + 1, "t", parts[0])?,
            parse_usize(path, idx + 1, "asset_index", parts[1])?,
            parse_f64(path, idx + 1, "expected", parts[2])?,
            parse_f64(path, idx + 1, "realized", parts[3])?,
        ));
    }
    let t_steps = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let n = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if rows.len() != t_steps * n {
        return Err(parse_err(path, 1, "panel is not a full t x asset grid"));
    }
    let mut expected = DMatrix::zeros(t_steps, n);
    let mut realized = DMatrix::zeros(t_steps, n);
    for (t, i, e, r_val) in rows {
        expected[(t, i)] = e;
        realized[(t, i)] = r_val;
    }
    Ok(ReturnsPanel { expected, realized })
}

// ---------------------------------------------------------------------------
// universe JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseDocument {
    pub schema_version: u32,
    pub alpha: Vec<f64>,
    pub beta0: Vec<f64>,
    pub sigma_idio: f64,
    pub sigma_r: MatrixDoc,
}

pub fn write_universe_json(path: &Path, universe: &AssetUniverse) -> Result<()> {
    write_json(
        path,
        &UniverseDocument {
            schema_version: SCHEMA_VERSION,
            alpha: universe.alpha.iter().cloned().collect(),
            beta0: universe.beta0.iter().cloned().collect(),
            sigma_idio: universe.sigma_idio,
            sigma_r: MatrixDoc::from_matrix(&universe.sigma_r),
        },
    )
}

pub fn read_universe_json(path: &Path) -> Result<AssetUniverse> {
    let doc: UniverseDocument = read_json(path)?;
    Ok(AssetUniverse {
        alpha: DVector::from_vec(doc.alpha),
        beta0: DVector::from_vec(doc.beta0),
        sigma_idio: doc.sigma_idio,
        sigma_r: doc.sigma_r.to_matrix()?,
    })
}

// ---------------------------------------------------------------------------
// trajectories CSV
// ---------------------------------------------------------------------------

pub fn write_trajectories_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "traj_id,t,kind,asset_index,value").map_err(io_err)?;
    for (id, traj) in trajectories.iter().enumerate() {
        for (t, state) in traj.states.iter().enumerate() {
            for (i, v) in state.iter().enumerate() {
                writeln!(w, "{id},{t},state,{i},{v}").map_err(io_err)?;
            }
        }
        for (t, action) in traj.actions.iter().enumerate() {
            for (i, v) in action.iter().enumerate() {
                writeln!(w, "{id},{t},action,{i},{v}").map_err(io_err)?;
            }
        }
    }
    w.flush().map_err(io_err)
}

pub fn write_contributions_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "traj_id,t,contribution").map_err(io_err)?;
    for (id, traj) in trajectories.iter().enumerate() {
        for (t, c) in traj.contributions.iter().enumerate() {
            writeln!(w, "{id},{t},{c}").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Reads trajectories back from the state/action CSV plus the contributions
/// CSV.
pub fn read_trajectories_csv(traj_path: &Path, contrib_path: &Path) -> Result<Vec<Trajectory>> {
    #[derive(Default)]
    struct Partial {
        states: Vec<(usize, usize, f64)>,
        actions: Vec<(usize, usize, f64)>,
    }

    let r = open(traj_path)?;
    let mut partials: Vec<Partial> = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(traj_path.display().to_string(), e))?;
        if idx == 0 {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(parse_err(traj_path, idx + 1, "expected 5 columns"));
        }
        let id = parse_usize(traj_path, idx + 1, "traj_id", parts[0])?;
        let t = parse_usize(traj_path, idx + 1, "t", parts[1])?;
        let i = parse_usize(traj_path, idx + 1, "asset_index", parts[3])?;
        let v = parse_f64(traj_path, idx + 1, "value", parts[4])?;
        while partials.len() <= id {
            partials.push(Partial::default());
        }
        match parts[2] {
            "state" => partials[id].states.push((t, i, v)),
            "action" => partials[id].actions.push((t, i, v)),
            other => return Err(parse_err(traj_path, idx + 1, format!("bad kind {other:?}"))),
        }
    }

    let mut contributions: Vec<Vec<(usize, f64)>> = vec![Vec::new(); partials.len()];
    let r = open(contrib_path)?;
    for (idx, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(contrib_path.display().to_string(), e))?;
        if idx == 0 {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(parse_err(contrib_path, idx + 1, "expected 3 columns"));
        }
        let id = parse_usize(contrib_path, idx + 1, "traj_id", parts[0])?;
        if id >= contributions.len() {
            return Err(parse_err(
                contrib_path,
                idx + 1,
                format!("traj_id {id} has no states in the trajectory file"),
            ));
        }
        contributions[id].push((
            parse_usize(contrib_path, idx + 1, "t", parts[1])?,
            parse_f64(contrib_path, idx + 1, "contribution", parts[2])?,
        ));
    }

    let mut out = Vec::with_capacity(partials.len());
    for (id, partial) in partials.into_iter().enumerate() {
        let build = |mut cells: Vec<(usize, usize, f64)>, label: &str| -> Result<Vec<DVector<f64>>> {
            if cells.is_empty() {
                return Ok(Vec::new());
            }
            let t_max = cells.iter().map(|c| c.0 + 1).max().unwrap();
            let n = cells.iter().map(|c| c.1 + 1).max().unwrap();
            if cells.len() != t_max * n {
                return Err(parse_err(
                    traj_path,
                    1,
                    format!("trajectory {id}: {label} grid is incomplete"),
                ));
            }
            cells.sort_unstable_by_key(|c| (c.0, c.1));
            Ok((0..t_max)
                .map(|t| DVector::from_fn(n, |i, _| cells[t * n + i].2))
                .collect())
        };
        let states = build(partial.states, "state")?;
        let actions = build(partial.actions, "action")?;
        if states.len() != actions.len() + 1 {
            return Err(parse_err(
                traj_path,
                1,
                format!(
                    "trajectory {id}: {} states for {} actions",
                    states.len(),
                    actions.len()
                ),
            ));
        }
        let mut contribs = contributions[id].clone();
        contribs.sort_unstable_by_key(|c| c.0);
        if contribs.len() != actions.len() {
            return Err(parse_err(
                contrib_path,
                1,
                format!("trajectory {id}: contribution count mismatch"),
            ));
        }
        out.push(Trajectory {
            states,
            actions,
            contributions: contribs.into_iter().map(|c| c.1).collect(),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// policy JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCoeffsDocument {
    pub q_xx: MatrixDoc,
    pub q_ux: MatrixDoc,
    pub q_uu: MatrixDoc,
    pub q_x: Vec<f64>,
    pub q_u: Vec<f64>,
    pub q_0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FCoeffsDocument {
    pub f_xx: MatrixDoc,
    pub f_x: Vec<f64>,
    pub f_0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub schema_version: u32,
    pub horizon: usize,
    pub num_assets: usize,
    pub u_tilde: Vec<Vec<f64>>,
    pub v_tilde: Vec<MatrixDoc>,
    pub sigma_tilde: Vec<MatrixDoc>,
    pub g: Vec<GCoeffsDocument>,
    pub f: Vec<FCoeffsDocument>,
}

pub fn write_policy_json(path: &Path, solution: &PolicySolution) -> Result<()> {
    let doc = PolicyDocument {
        schema_version: SCHEMA_VERSION,
        horizon: solution.horizon(),
        num_assets: solution.num_assets(),
        u_tilde: solution
            .u_tilde
            .iter()
            .map(|v| v.iter().cloned().collect())
            .collect(),
        v_tilde: solution.v_tilde.iter().map(MatrixDoc::from_matrix).collect(),
        sigma_tilde: solution
            .sigma_tilde
            .iter()
            .map(MatrixDoc::from_matrix)
            .collect(),
        g: solution
            .g
            .iter()
            .map(|g| GCoeffsDocument {
                q_xx: MatrixDoc::from_matrix(&g.q_xx),
                q_ux: MatrixDoc::from_matrix(&g.q_ux),
                q_uu: MatrixDoc::from_matrix(&g.q_uu),
                q_x: g.q_x.iter().cloned().collect(),
                q_u: g.q_u.iter().cloned().collect(),
                q_0: g.q_0,
            })
            .collect(),
        f: solution
            .f
            .iter()
            .map(|f| FCoeffsDocument {
                f_xx: MatrixDoc::from_matrix(&f.f_xx),
                f_x: f.f_x.iter().cloned().collect(),
                f_0: f.f_0,
            })
            .collect(),
    };
    write_json(path, &doc)
}

pub fn read_policy_json(path: &Path) -> Result<PolicySolution> {
    let doc: PolicyDocument = read_json(path)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported policy schema_version {}",
            doc.schema_version
        )));
    }
    if doc.u_tilde.len() != doc.horizon
        || doc.v_tilde.len() != doc.horizon
        || doc.sigma_tilde.len() != doc.horizon
        || doc.g.len() != doc.horizon
        || doc.f.len() != doc.horizon + 1
    {
        return Err(Error::Shape("policy document has inconsistent lengths".into()));
    }
    Ok(PolicySolution {
        u_tilde: doc.u_tilde.into_iter().map(DVector::from_vec).collect(),
        v_tilde: doc
            .v_tilde
            .iter()
            .map(|m| m.to_matrix())
            .collect::<Result<_>>()?,
        sigma_tilde: doc
            .sigma_tilde
            .iter()
            .map(|m| m.to_matrix())
            .collect::<Result<_>>()?,
        g: doc
            .g
            .into_iter()
            .map(|g| {
                Ok(GCoeffs {
                    q_xx: g.q_xx.to_matrix()?,
                    q_ux: g.q_ux.to_matrix()?,
                    q_uu: g.q_uu.to_matrix()?,
                    q_x: DVector::from_vec(g.q_x),
                    q_u: DVector::from_vec(g.q_u),
                    q_0: g.q_0,
                })
            })
            .collect::<Result<_>>()?,
        f: doc
            .f
            .into_iter()
            .map(|f| {
                Ok(FCoeffs {
                    f_xx: f.f_xx.to_matrix()?,
                    f_x: DVector::from_vec(f.f_x),
                    f_0: f.f_0,
                })
            })
            .collect::<Result<_>>()?,
    })
}

// ---------------------------------------------------------------------------
// fit JSON
// ---------------------------------------------------------------------------

/// Side-by-side comparison of reference and learned parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterComparison {
    pub reference: RewardParams,
    pub learned: RewardParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub theta_star: RewardParams,
    pub loss_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Wall-clock time of the fit; excluded from determinism comparisons.
    pub wall_time_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ParameterComparison>,
}

impl FitDocument {
    pub fn new(report: &FitReport, wall_time_secs: f64) -> Self {
        FitDocument {
            schema_version: SCHEMA_VERSION,
            theta_star: report.theta_star,
            loss_history: report.loss_history.clone(),
            grad_norm_history: report.grad_norm_history.clone(),
            iterations: report.iterations,
            converged: report.converged,
            wall_time_secs,
            comparison: None,
        }
    }
}

// ---------------------------------------------------------------------------
// plot data CSV
// ---------------------------------------------------------------------------

/// Time series behind the portfolio-vs-benchmark plots: value, benchmark,
/// contribution, and contribution-adjusted step return per timestep.
pub fn write_plot_data_csv(
    path: &Path,
    values: &[f64],
    benchmark: &[f64],
    contributions: &[f64],
    step_returns: &[f64],
) -> Result<()> {
    let mut w = create(path)?;
    let io_err = |e| Error::io(path.display().to_string(), e);
    writeln!(w, "t,portfolio_value,benchmark,contribution,step_return").map_err(io_err)?;
    for t in 0..values.len() {
        if t < contributions.len() {
            writeln!(
                w,
                "{t},{},{},{},{}",
                values[t], benchmark[t], contributions[t], step_returns[t]
            )
            .map_err(io_err)?;
        } else {
            writeln!(w, "{t},{},{},,", values[t], benchmark[t]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}
