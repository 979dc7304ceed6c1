//! The data-producing commands. Each returns a [`Report`] whose rows come out
//! in grid order regardless of how the points were scheduled.

use std::f64::consts::PI;

use anyhow::Context;
use qwork::bounds::{first_moment_bound, qubit_variance_gap, second_moment_bound, variance_ordering, VarianceOrdering};
use qwork::coherence::{bloch, l1_coherence, qubit_state, CoherenceBasis};
use qwork::entropy::{entropy_report, qubit_lr_closed_form, thermal_coherent_qubit};
use qwork::io::{to_csv, to_json, MatrixJson};
use qwork::sampling::{derive_seed, max_gap_over_unitaries, random_state_with_coherence, MomentOrder, RandomSpec, STATE_ENSEMBLE};
use qwork::workstats::{joint, Scheme};
use qwork::{DensityMatrix, HermitianObservable, Protocol, UnitaryPropagator};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{linspace, usage, Format, Settings};

#[derive(Debug, Clone, Serialize)]
pub struct Report<M, R> {
    pub command: &'static str,
    pub metadata: M,
    pub rows: Vec<R>,
}

impl<M: Serialize, R: Serialize> Report<M, R> {
    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        Ok(match format {
            Format::Csv => to_csv(&self.rows)?,
            Format::Json => to_json(self)? + "\n",
        })
    }
}

fn parse_levels(text: &str, dim: usize) -> anyhow::Result<HermitianObservable> {
    let levels = crate::config::parse_grid(text)?;
    if levels.len() != dim {
        anyhow::bail!("expected {dim} levels, got {}", levels.len());
    }
    Ok(HermitianObservable::diagonal(&levels)?)
}

/// `default`, `diag:<levels>` or `file:<matrix json>`.
pub fn hamiltonian(spec: &str, dim: usize) -> anyhow::Result<HermitianObservable> {
    let s = 1.0 / 3f64.sqrt();
    let h = match spec {
        "default" => match dim {
            2 => HermitianObservable::diagonal(&[1.0, -1.0])?,
            3 => HermitianObservable::diagonal(&[s, s, -2.0 * s])?,
            _ => return Err(usage(format!("no default hamiltonian for dim={dim}; set hamiltonian=diag:... or file:..."))),
        },
        _ if spec.starts_with("diag:") => parse_levels(&spec[5..], dim).map_err(|e| usage(format!("hamiltonian: {e}")))?,
        _ if spec.starts_with("file:") => {
            let path = &spec[5..];
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("hamiltonian file {path}: {e}")))?;
            let m = qwork::io::matrix_from_json::<f64>(&text).map_err(|e| usage(format!("hamiltonian file {path}: {e}")))?;
            HermitianObservable::new(&m).map_err(|e| usage(format!("hamiltonian file {path}: {e}")))?
        }
        _ => return Err(usage(format!("hamiltonian must be default, diag:<levels> or file:<path>, got '{spec}'"))),
    };
    if h.dim() != dim {
        return Err(usage(format!("hamiltonian has dimension {}, expected dim={dim}", h.dim())));
    }
    Ok(h)
}

pub const BOUND_SCAN_KEYS: &[&str] = &["dim", "hamiltonian", "order", "points", "c_max"];

#[derive(Debug, Clone, Serialize)]
pub struct BoundScanMeta {
    pub dim: usize,
    pub hamiltonian: MatrixJson,
    pub order: &'static str,
    pub points: usize,
    pub c_max: f64,
    pub samples: usize,
    pub seed: u64,
    pub state_ensemble: &'static str,
    pub coherence_basis: &'static str,
    pub seeding: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundScanRow {
    #[serde(rename = "C_target")]
    pub c_target: f64,
    #[serde(rename = "C_actual")]
    pub c_actual: f64,
    pub max_gap: f64,
    pub bound: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// One bound-scan point: state from `seed`, unitaries from `derive_seed(seed, index)`.
pub fn bound_scan_point(
    h: &HermitianObservable,
    order: MomentOrder,
    c_target: f64,
    index: usize,
    seed: u64,
    samples: usize,
) -> anyhow::Result<BoundScanRow> {
    let d = h.dim();
    let rho = random_state_with_coherence(d, c_target, h, &RandomSpec::new(seed, d, 1)?)?;
    let spec = RandomSpec::new(derive_seed(seed, index as u64), d, samples)?;
    let best = max_gap_over_unitaries(&rho, h, order, &spec)?;
    let bound = match order {
        MomentOrder::First => first_moment_bound(h, &rho)?,
        MomentOrder::Second => second_moment_bound(h, &rho)?,
    };
    Ok(BoundScanRow {
        c_target,
        c_actual: l1_coherence(&rho, &CoherenceBasis::eigenvectors_of(h))?,
        max_gap: best.best_gap,
        bound,
        n_samples: samples,
        seed,
    })
}

pub fn bound_scan(s: &Settings) -> anyhow::Result<Report<BoundScanMeta, BoundScanRow>> {
    let dim: usize = s.integer("dim", 3)?;
    if dim < 2 {
        return Err(usage("bound-scan: dim must be >= 2"));
    }
    let h = hamiltonian(s.text("hamiltonian", "default"), dim)?;
    let order = match s.text("order", "first") {
        "first" => MomentOrder::First,
        "second" => MomentOrder::Second,
        o => return Err(usage(format!("bound-scan: order must be first or second, got '{o}'"))),
    };
    let points: usize = s.integer("points", 20)?;
    let c_max = s.real("c_max", (dim - 1) as f64)?;
    if points == 0 || !(0.0..=(dim - 1) as f64).contains(&c_max) {
        return Err(usage(format!("bound-scan: need points >= 1 and 0 <= c_max <= {}", dim - 1)));
    }
    let samples: usize = s.integer("samples", 10_000)?;
    if samples == 0 {
        return Err(usage("bound-scan: samples must be >= 1"));
    }
    let seed: u64 = s.integer("seed", 0)?;
    let grid = linspace(0.0, c_max, points)?;
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, &c)| bound_scan_point(&h, order, c, i, seed, samples))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(Report {
        command: "bound-scan",
        metadata: BoundScanMeta {
            dim,
            hamiltonian: MatrixJson::from_matrix(h.matrix())?,
            order: match order {
                MomentOrder::First => "first",
                MomentOrder::Second => "second",
            },
            points,
            c_max,
            samples,
            seed,
            state_ensemble: STATE_ENSEMBLE,
            coherence_basis: CoherenceBasis::eigenvectors_of(&h).label().describe(),
            seeding: "state drawn from `seed`; Haar unitaries for grid point i drawn from derive_seed(seed, i)",
        },
        rows,
    })
}

pub const VARIANCE_MAP_KEYS: &[&str] = &["grid", "taus", "points", "n_theta", "n_phi", "az_sign", "levels"];

#[derive(Debug, Clone, Serialize)]
pub struct VarianceMapMeta {
    pub grid: String,
    pub levels: [f64; 2],
    pub taus: Vec<f64>,
    pub evolution: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceRow {
    pub a_x: f64,
    pub a_y: f64,
    pub a_z: f64,
    pub tau: f64,
    pub gap_variance: f64,
}

fn qubit_levels(s: &Settings) -> anyhow::Result<HermitianObservable> {
    let h = parse_levels(s.text("levels", "1,-1"), 2).map_err(|e| usage(format!("levels: {e}")))?;
    if h.is_degenerate() {
        return Err(usage("levels: the two levels must differ"));
    }
    Ok(h)
}

/// (Delta w)^2_MH - (Delta w)^2_TPM from the two work distributions.
pub fn variance_gap_numeric(rho: &DensityMatrix, h: &HermitianObservable, tau: f64) -> anyhow::Result<f64> {
    let p = Protocol::cyclic(h.clone(), UnitaryPropagator::real_rotation(tau))?;
    let var = |scheme| -> anyhow::Result<f64> {
        Ok(joint(scheme, rho, &p)?.work_distribution().moments(2)?.variance())
    };
    Ok(var(Scheme::Mh)? - var(Scheme::Tpm)?)
}

fn az_sign(s: &Settings) -> anyhow::Result<f64> {
    match s.text("az_sign", "1") {
        "1" | "+1" | "+" => Ok(1.0),
        "-1" | "-" => Ok(-1.0),
        o => Err(usage(format!("az_sign must be 1 or -1, got '{o}'"))),
    }
}

pub fn variance_map(s: &Settings) -> anyhow::Result<Report<VarianceMapMeta, VarianceRow>> {
    let h = qubit_levels(s)?;
    let grid = s.text("grid", "line").to_string();
    let (default_taus, points): (String, Vec<[f64; 3]>) = match grid.as_str() {
        "line" => {
            let n: usize = s.integer("points", 201)?;
            let sign = az_sign(s)?;
            let pts = linspace(-1.0, 1.0, n).map_err(|e| usage(format!("points: {e}")))?;
            ("0.1,pi/5,pi/4,3pi/4".to_string(), pts.into_iter().map(|ax| [ax, 0.0, sign * (1.0 - ax * ax).max(0.0).sqrt()]).collect())
        }
        "sphere" => {
            let nt: usize = s.integer("n_theta", 41)?;
            let np: usize = s.integer("n_phi", 80)?;
            if np == 0 {
                return Err(usage("n_phi must be >= 1"));
            }
            let thetas = linspace(0.0, PI, nt).map_err(|e| usage(format!("n_theta: {e}")))?;
            let mut pts = Vec::new();
            for t in thetas {
                for j in 0..np {
                    let phi = 2.0 * PI * j as f64 / np as f64;
                    pts.push([t.sin() * phi.cos(), t.sin() * phi.sin(), t.cos()]);
                }
            }
            (format!("0.1,pi/4,{},3pi/4", PI / 2.0 - 0.01), pts)
        }
        g => return Err(usage(format!("grid must be line or sphere, got '{g}'"))),
    };
    let taus = s.grid("taus", &default_taus)?;
    let jobs: Vec<(f64, [f64; 3])> = taus.iter().flat_map(|&t| points.iter().map(move |p| (t, *p))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(tau, [a_x, a_y, a_z])| {
            let rho = qubit_state(a_x, a_y, a_z)?;
            Ok(VarianceRow { a_x, a_y, a_z, tau, gap_variance: variance_gap_numeric(&rho, &h, tau)? })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let e = h.eigenvalues();
    Ok(Report {
        command: "variance-map",
        metadata: VarianceMapMeta { grid, levels: [e[0], e[1]], taus, evolution: "real rotation [[cos tau, sin tau], [-sin tau, cos tau]], H_0 = H_tau" },
        rows,
    })
}

pub const TABLE1_KEYS: &[&str] = &["ax_points", "taus", "az_signs", "levels", "band"];

#[derive(Debug, Clone, Serialize)]
pub struct Table1Meta {
    pub levels: [f64; 2],
    pub band: f64,
    pub root_formula: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Row {
    pub a_x: f64,
    pub a_z: f64,
    pub tau: f64,
    pub gap_closed_form: f64,
    pub gap_numeric: f64,
    pub ordering: VarianceOrdering,
    pub in_band: bool,
    pub consistent: bool,
}

/// Whether `ordering` agrees with the sign of `gap`; points within `band` of a
/// root are accepted unconditionally.
pub fn ordering_consistent(ordering: VarianceOrdering, gap: f64, in_band: bool) -> bool {
    in_band
        || match ordering {
            VarianceOrdering::MhBelow => gap <= 0.0,
            VarianceOrdering::MhAbove => gap >= 0.0,
            VarianceOrdering::Equal => gap.abs() <= 1e-12,
        }
}

pub fn table1_point(h: &HermitianObservable, a_x: f64, a_z: f64, tau: f64, band: f64) -> anyhow::Result<Table1Row> {
    let rho = qubit_state(a_x, 0.0, a_z)?;
    let gap_closed_form = qubit_variance_gap(&rho, h, tau)?;
    let gap_numeric = variance_gap_numeric(&rho, h, tau)?;
    let b = bloch(&rho, &CoherenceBasis::computational(2))?;
    let ordering = variance_ordering(b.a_x, b.a_z, tau)?;
    let root = -2.0 * a_z * tau.tan();
    let in_band = a_x.abs() <= band || (a_x - root).abs() <= band;
    Ok(Table1Row {
        a_x,
        a_z,
        tau,
        gap_closed_form,
        gap_numeric,
        ordering,
        in_band,
        consistent: ordering_consistent(ordering, gap_closed_form, in_band),
    })
}

pub fn table1(s: &Settings) -> anyhow::Result<Report<Table1Meta, Table1Row>> {
    let h = qubit_levels(s)?;
    let n: usize = s.integer("ax_points", 200)?;
    let axs = linspace(-1.0, 1.0, n).map_err(|e| usage(format!("ax_points: {e}")))?;
    let taus = s.grid("taus", &format!("0.01..{}:50", PI - 0.01))?;
    let signs = s.grid("az_signs", "1,-1")?;
    if signs.iter().any(|&x| x != 1.0 && x != -1.0) {
        return Err(usage("az_signs entries must be 1 or -1"));
    }
    let band = s.real("band", 1e-6)?;
    let mut jobs = Vec::new();
    for &sign in &signs {
        for &tau in &taus {
            for &ax in &axs {
                jobs.push((ax, sign * (1.0 - ax * ax).max(0.0).sqrt(), tau));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(ax, az, tau)| table1_point(&h, ax, az, tau, band))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let e = h.eigenvalues();
    Ok(Report {
        command: "table1",
        metadata: Table1Meta { levels: [e[0], e[1]], band, root_formula: "gap roots at a_x = 0 and a_x = -2 a_z tan(tau)" },
        rows,
    })
}

pub const ENTROPY_SCAN_KEYS: &[&str] = &["betas", "taus", "omegas", "k"];

#[derive(Debug, Clone, Serialize)]
pub struct EntropyMeta {
    pub family: &'static str,
    pub k: f64,
    pub betas: Vec<f64>,
    pub taus: Vec<f64>,
    pub omegas: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyRow {
    pub beta: f64,
    pub tau: f64,
    pub omega: f64,
    #[serde(rename = "C")]
    pub coherence: f64,
    #[serde(rename = "delta_F")]
    pub delta_f: f64,
    #[serde(rename = "w_TPM")]
    pub w_tpm: f64,
    #[serde(rename = "w_MH")]
    pub w_mh: f64,
    #[serde(rename = "Sigma_TPM")]
    pub sigma_tpm: f64,
    #[serde(rename = "Sigma_MH")]
    pub sigma_mh: f64,
    pub xi: f64,
    pub negativity: f64,
    pub neg_log_xi: Option<f64>,
    #[serde(rename = "exp_work_MH")]
    pub exp_work_mh: f64,
    #[serde(rename = "Sigma_LR_MH")]
    pub sigma_lr_mh: f64,
    #[serde(rename = "Sigma_LR_qubit")]
    pub sigma_lr_qubit: f64,
    #[serde(rename = "min_Sigma_MH")]
    pub min_sigma_mh: f64,
    #[serde(rename = "min_Sigma_TPM")]
    pub min_sigma_tpm: f64,
}

/// H_0 = sigma_z, H_tau = k sigma_z, real rotation by `tau`.
pub fn entropy_protocol(k: f64, tau: f64) -> anyhow::Result<Protocol> {
    Ok(Protocol::new(
        HermitianObservable::diagonal(&[1.0, -1.0])?,
        HermitianObservable::diagonal(&[k, -k])?,
        UnitaryPropagator::real_rotation(tau),
    )?)
}

/// One entropy-scan row without the min-over-omega columns.
pub fn entropy_point(beta: f64, tau: f64, omega: f64, k: f64) -> anyhow::Result<EntropyRow> {
    let rho = thermal_coherent_qubit(beta, omega)?;
    let p = entropy_protocol(k, tau)?;
    let r = entropy_report(&rho, &p, beta).with_context(|| format!("beta={beta} tau={tau} omega={omega}"))?;
    let b = bloch(&rho, &CoherenceBasis::computational(2))?;
    Ok(EntropyRow {
        beta,
        tau,
        omega,
        coherence: b.coherence,
        delta_f: r.delta_f,
        w_tpm: r.mean_work_tpm,
        w_mh: r.mean_work_mh,
        sigma_tpm: r.sigma_tpm,
        sigma_mh: r.sigma_mh,
        xi: r.xi,
        negativity: r.mh_negativity,
        neg_log_xi: r.neg_log_xi,
        exp_work_mh: r.exp_work_mh,
        sigma_lr_mh: r.sigma_lr_mh,
        sigma_lr_qubit: qubit_lr_closed_form(beta, k, tau, b.chi, b.coherence),
        min_sigma_mh: f64::NAN,
        min_sigma_tpm: f64::NAN,
    })
}

pub fn entropy_scan(s: &Settings) -> anyhow::Result<Report<EntropyMeta, EntropyRow>> {
    let betas = s.grid("betas", "0.2")?;
    let taus = s.grid("taus", "3pi/4")?;
    let omegas = s.grid("omegas", "0..1:512")?;
    let k = s.real("k", 0.5)?;
    if betas.iter().any(|&b| b <= 0.0) {
        return Err(usage("betas must all be > 0"));
    }
    if omegas.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
        return Err(usage("omegas must lie in [0, 1]"));
    }
    let mut jobs = Vec::new();
    for &b in &betas {
        for &t in &taus {
            for &w in &omegas {
                jobs.push((b, t, w));
            }
        }
    }
    let mut rows = jobs
        .par_iter()
        .map(|&(b, t, w)| entropy_point(b, t, w, k))
        .collect::<anyhow::Result<Vec<_>>>()?;
    for group in rows.chunks_mut(omegas.len()) {
        let min_mh = group.iter().map(|r| r.sigma_mh).fold(f64::INFINITY, f64::min);
        let min_tpm = group.iter().map(|r| r.sigma_tpm).fold(f64::INFINITY, f64::min);
        for r in group {
            r.min_sigma_mh = min_mh;
            r.min_sigma_tpm = min_tpm;
        }
    }
    Ok(Report {
        command: "entropy-scan",
        metadata: EntropyMeta {
            family: "rho = [[1 - a^2, omega a sqrt(1 - a^2)], [omega a sqrt(1 - a^2), a^2]], a^2 = e^beta / Tr e^{-beta sigma_z}; H_0 = sigma_z, H_tau = k sigma_z, real rotation",
            k,
            betas,
            taus,
            omegas: omegas.len(),
        },
        rows,
    })
}
