//! The five subcommands. Each `*_tables` function is pure and returns its
//! CSV tables; [`execute`] writes them along with a manifest.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::environment::{flip_expectation, EnvState};
use crate::linalg::uhlmann_fidelity;
use crate::protocol::{
    erase, make_source, make_target, measure_and_feedforward, partial_exchange, transfer_analytic, EquatorialPhase,
    TransferOutcome,
};
use crate::spectral::{beam_splitter_coincidence, hom_scan, spdc_to_env, FilterShape, SpectralModel, REFERENCE_TOL};
use crate::tomography::{
    analyze, expected_counts, mle_reconstruct, simulate_counts_with, task_rng, Metrics, ALL_BASES,
};

use super::config::{Command, EnvSpec, RunConfig};
use super::io::{inset_path, read_env_file, write_manifest, Cell, Derived, Table};
use super::CliError;

/// Nominal counts per basis for ideal-statistics reconstructions.
const IDEAL_SCALE: f64 = 1e6;

pub fn spectral_model(cfg: &RunConfig) -> Result<SpectralModel, CliError> {
    let filter = FilterShape::new(cfg.shape, cfg.center_nm, cfg.fwhm_nm)?;
    Ok(SpectralModel::new(filter, cfg.bins, cfg.mode_overlap)?)
}

enum EnvSource {
    Quadrature(SpectralModel),
    Truncated(SpectralModel, usize),
    Fixed(EnvState),
}

/// One delay setting with the `D` in force and, when the environment is
/// explicit, the environment itself.
struct DelayCell {
    delay: Option<f64>,
    d: f64,
    env: Option<EnvState>,
}

impl DelayCell {
    fn delay_cell(&self) -> Cell {
        self.delay.map(Cell::Num).unwrap_or(Cell::Text(String::new()))
    }
}

fn env_source(cfg: &RunConfig) -> Result<EnvSource, CliError> {
    Ok(match &cfg.env {
        EnvSpec::Spdc => EnvSource::Quadrature(spectral_model(cfg)?),
        EnvSpec::SpdcTruncated(d) => EnvSource::Truncated(spectral_model(cfg)?, *d),
        EnvSpec::Singlet => EnvSource::Fixed(EnvState::singlet()),
        EnvSpec::SymmetricBell => EnvSource::Fixed(EnvState::symmetric_bell()),
        EnvSpec::Product(c) => EnvSource::Fixed(EnvState::product_with_overlap(*c)?),
        EnvSpec::File(p) => EnvSource::Fixed(read_env_file(p)?),
    })
}

fn delay_cells(cfg: &RunConfig) -> Result<Vec<DelayCell>, CliError> {
    match env_source(cfg)? {
        EnvSource::Quadrature(model) => cfg
            .delays
            .par_iter()
            .map(|&dt| {
                Ok(DelayCell {
                    delay: Some(dt),
                    d: model.flip_expectation(dt)?,
                    env: None,
                })
            })
            .collect(),
        EnvSource::Truncated(model, d) => cfg
            .delays
            .par_iter()
            .map(|&dt| {
                let env = spdc_to_env(&model.state(dt)?, d)?;
                Ok(DelayCell {
                    delay: Some(dt),
                    d: flip_expectation(&env)?,
                    env: Some(env),
                })
            })
            .collect(),
        // the delay does not act on a fixed environment
        EnvSource::Fixed(env) => Ok(vec![DelayCell {
            delay: None,
            d: flip_expectation(&env)?,
            env: Some(env),
        }]),
    }
}

fn run_protocol(
    cell: &DelayCell,
    theta: EquatorialPhase,
    cfg: &RunConfig,
    mirror: bool,
) -> Result<TransferOutcome, CliError> {
    match &cell.env {
        Some(env) => {
            let ex = partial_exchange(&make_source(theta), &make_target(), env)?;
            Ok(if mirror {
                erase(&ex, cfg.compensate_sign)
            } else {
                measure_and_feedforward(&ex, cfg.compensate_sign)
            })
        }
        // both protocols share the closed form
        None => Ok(transfer_analytic(theta, cell.d, cfg.compensate_sign)?),
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for a single value.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn hom_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let source = env_source(cfg)?;
    let mut delays = cfg.delays.clone();
    delays.sort_by(f64::total_cmp);
    let mut table = Table::new(&["delay_ps", "D", "P_C", "R_rel"]);
    match source {
        EnvSource::Quadrature(model) => {
            for p in hom_scan(&model, &delays, cfg.reference_delay)? {
                table.push(vec![p.delay.into(), p.d.into(), p.p_c.into(), p.r_rel.into()]);
            }
        }
        EnvSource::Truncated(model, d) => {
            let d_ref = model.flip_expectation(cfg.reference_delay)?;
            if d_ref.abs() >= REFERENCE_TOL {
                return Err(CliError::Config(format!(
                    "invalid value for 'reference_delay': |D| = {:.3e} is too close to the dip",
                    d_ref.abs()
                )));
            }
            let rows: Vec<Vec<Cell>> = delays
                .par_iter()
                .map(|&dt| {
                    let env = spdc_to_env(&model.state(dt)?, d)?;
                    let p_c = beam_splitter_coincidence(&env)?;
                    Ok(vec![
                        dt.into(),
                        flip_expectation(&env)?.into(),
                        p_c.into(),
                        (2.0 * p_c).into(),
                    ])
                })
                .collect::<Result<_, CliError>>()?;
            table.rows = rows;
        }
        EnvSource::Fixed(_) => {
            return Err(CliError::Config(
                "invalid value for 'env': hom needs a spectral environment (spdc or spdc:<d>)".into(),
            ))
        }
    }
    Ok(table)
}

fn phases(cfg: &RunConfig) -> Vec<EquatorialPhase> {
    cfg.thetas.iter().map(|&t| EquatorialPhase::from_degrees(t)).collect()
}

pub fn transfer_table(cfg: &RunConfig, mirror: bool) -> Result<Table, CliError> {
    let cells = delay_cells(cfg)?;
    let thetas = phases(cfg);
    let mut table = Table::new(&[
        "delay_ps",
        "D",
        "theta_deg",
        "overlap",
        "max_eigenvalue",
        "purity",
        "fidelity_vs_theory",
    ]);
    for cell in &cells {
        let metrics: Vec<[f64; 4]> = thetas
            .par_iter()
            .map(|&th| {
                let out = run_protocol(cell, th, cfg, mirror)?;
                let theory = transfer_analytic(th, cell.d, cfg.compensate_sign)?;
                Ok([
                    out.overlap(th),
                    out.max_eigenvalue(),
                    out.purity(),
                    uhlmann_fidelity(&out.rho_corrected, &theory.rho_corrected)?,
                ])
            })
            .collect::<Result<_, CliError>>()?;
        for (m, deg) in metrics.iter().zip(&cfg.thetas) {
            let mut row = vec![cell.delay_cell(), cell.d.into(), (*deg).into()];
            row.extend(m.iter().map(|&x| Cell::Num(x)));
            table.push(row);
        }
        let mut agg = vec![cell.delay_cell(), cell.d.into(), "mean".into()];
        for k in 0..4 {
            let col: Vec<f64> = metrics.iter().map(|m| m[k]).collect();
            agg.push(mean(&col).into());
        }
        table.push(agg);
    }
    Ok(table)
}

/// Reconstruction metrics for every `(cell, θ, repeat)`, indexed in that order.
fn tomography_runs(cfg: &RunConfig, cells: &[DelayCell]) -> Result<Vec<Metrics>, CliError> {
    let thetas = phases(cfg);
    let per_cell = thetas.len() * cfg.repeats;
    let tasks = cells.len() * per_cell;
    // exact outputs, computed once per (cell, θ)
    let outputs: Vec<(TransferOutcome, TransferOutcome)> = (0..cells.len() * thetas.len())
        .into_par_iter()
        .map(|i| {
            let (cell, th) = (&cells[i / thetas.len()], thetas[i % thetas.len()]);
            Ok((
                run_protocol(cell, th, cfg, false)?,
                transfer_analytic(th, cell.d, cfg.compensate_sign)?,
            ))
        })
        .collect::<Result<_, CliError>>()?;
    (0..tasks)
        .into_par_iter()
        .map(|task| {
            let pair = task / cfg.repeats;
            let th = thetas[pair % thetas.len()];
            let (out, theory) = &outputs[pair];
            let records = if cfg.ideal_statistics() {
                expected_counts(&out.rho_corrected, &ALL_BASES, IDEAL_SCALE, cfg.efficiencies)?
            } else {
                let mut rng = task_rng(cfg.seed, task as u64);
                simulate_counts_with(&mut rng, &out.rho_corrected, &ALL_BASES, cfg.counts, cfg.efficiencies)?
            };
            let rec = mle_reconstruct(&records, cfg.max_iters, cfg.tol)?;
            if !rec.converged {
                return Err(CliError::Numeric(format!(
                    "reconstruction did not converge within {} iterations",
                    cfg.max_iters
                )));
            }
            Ok(analyze(&rec.rho_rec, &theory.rho_corrected, &th.state())?)
        })
        .collect()
}

pub fn tomo_table(cfg: &RunConfig) -> Result<Table, CliError> {
    let cells = delay_cells(cfg)?;
    let runs = tomography_runs(cfg, &cells)?;
    let mut table = Table::new(&[
        "delay_ps",
        "D",
        "theta_deg",
        "fidelity_mean",
        "fidelity_std",
        "overlap_mean",
        "overlap_std",
        "maxeig_mean",
        "maxeig_std",
        "purity_mean",
        "purity_std",
    ]);
    let stats = |chunk: &[Metrics]| -> Vec<Cell> {
        let cols: [Vec<f64>; 4] = [
            chunk.iter().map(|m| m.uhlmann_fidelity).collect(),
            chunk.iter().map(|m| m.overlap).collect(),
            chunk.iter().map(|m| m.max_eigenvalue()).collect(),
            chunk.iter().map(|m| m.purity).collect(),
        ];
        cols.iter()
            .flat_map(|c| [Cell::Num(mean(c)), Cell::Num(std_dev(c))])
            .collect()
    };
    let mut chunks = runs.chunks(cfg.repeats);
    for cell in &cells {
        for deg in &cfg.thetas {
            let chunk = chunks.next().expect("one chunk per (cell, θ)");
            let mut row = vec![cell.delay_cell(), cell.d.into(), (*deg).into()];
            row.extend(stats(chunk));
            table.push(row);
        }
    }
    let mut grand = vec!["all".into(), Cell::Text(String::new()), "all".into()];
    grand.extend(stats(&runs));
    table.push(grand);
    Ok(table)
}

/// Samples behind one row of the fig2 main panel.
#[derive(Debug, Clone)]
pub struct Fig2Point {
    pub delay: f64,
    pub d: f64,
    /// One value per phase in ideal-statistics mode, otherwise one
    /// phase-averaged value per repeat.
    pub overlaps: Vec<f64>,
    pub maxeigs: Vec<f64>,
    /// Theory lines for the output state at this `D`.
    pub overlap_theory: f64,
    pub maxeig_theory: f64,
}

fn spectral_only(cfg: &RunConfig) -> Result<SpectralModel, CliError> {
    match env_source(cfg)? {
        EnvSource::Quadrature(m) | EnvSource::Truncated(m, _) => Ok(m),
        EnvSource::Fixed(_) => Err(CliError::Config(
            "invalid value for 'env': fig2 needs a spectral environment (spdc or spdc:<d>)".into(),
        )),
    }
}

pub fn fig2_samples(cfg: &RunConfig) -> Result<Vec<Fig2Point>, CliError> {
    spectral_only(cfg)?;
    let cells = delay_cells(cfg)?;
    let n_theta = cfg.thetas.len();
    let (overlaps, maxeigs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if cfg.ideal_statistics() {
        let thetas = phases(cfg);
        cells
            .iter()
            .map(|cell| {
                let outs: Vec<TransferOutcome> = thetas
                    .iter()
                    .map(|&th| run_protocol(cell, th, cfg, false))
                    .collect::<Result<_, _>>()?;
                Ok((
                    outs.iter().zip(&thetas).map(|(o, &th)| o.overlap(th)).collect(),
                    outs.iter().map(|o| o.max_eigenvalue()).collect(),
                ))
            })
            .collect::<Result<Vec<_>, CliError>>()?
            .into_iter()
            .unzip()
    } else {
        let runs = tomography_runs(cfg, &cells)?;
        runs.chunks(n_theta * cfg.repeats)
            .map(|block| {
                let avg = |f: &dyn Fn(&Metrics) -> f64| -> Vec<f64> {
                    (0..cfg.repeats)
                        .map(|r| (0..n_theta).map(|t| f(&block[t * cfg.repeats + r])).sum::<f64>() / n_theta as f64)
                        .collect()
                };
                (avg(&|m| m.overlap), avg(&|m| m.max_eigenvalue()))
            })
            .unzip()
    };
    cells
        .iter()
        .zip(overlaps)
        .zip(maxeigs)
        .map(|((cell, overlaps), maxeigs)| {
            let theory = transfer_analytic(EquatorialPhase::from_radians(0.0), cell.d, cfg.compensate_sign)?;
            Ok(Fig2Point {
                delay: cell.delay.unwrap_or(0.0),
                d: cell.d,
                overlaps,
                maxeigs,
                overlap_theory: 0.5 * (1.0 + theory.d_effective),
                maxeig_theory: theory.max_eigenvalue(),
            })
        })
        .collect()
}

pub fn fig2_tables(cfg: &RunConfig) -> Result<(Table, Table), CliError> {
    let model = spectral_only(cfg)?;
    let mut main = Table::new(&[
        "D",
        "overlap_mean",
        "overlap_std",
        "maxeig_mean",
        "maxeig_std",
        "overlap_theory",
        "maxeig_theory",
    ]);
    for p in fig2_samples(cfg)? {
        main.push(vec![
            p.d.into(),
            mean(&p.overlaps).into(),
            std_dev(&p.overlaps).into(),
            mean(&p.maxeigs).into(),
            std_dev(&p.maxeigs).into(),
            p.overlap_theory.into(),
            p.maxeig_theory.into(),
        ]);
    }
    let mut inset = Table::new(&["delay_ps", "R_rel"]);
    for p in hom_scan(&model, &cfg.inset_delays, cfg.reference_delay)? {
        inset.push(vec![p.delay.into(), p.r_rel.into()]);
    }
    Ok((main, inset))
}

/// Runs the configured command, writes its CSV files and the manifest, and
/// returns the paths written.
pub fn execute(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    match cfg.command {
        Command::Hom => hom_table(cfg)?.write(&cfg.out)?,
        Command::Transfer => transfer_table(cfg, false)?.write(&cfg.out)?,
        Command::Erase => transfer_table(cfg, true)?.write(&cfg.out)?,
        Command::Tomo => tomo_table(cfg)?.write(&cfg.out)?,
        Command::Fig2 => {
            let (main, inset) = fig2_tables(cfg)?;
            main.write(&cfg.out)?;
            let p = inset_path(&cfg.out);
            inset.write(&p)?;
            written.push(p);
        }
    }
    written.insert(0, cfg.out.clone());
    let filter = FilterShape::new(cfg.shape, cfg.center_nm, cfg.fwhm_nm)?;
    let derived = Derived {
        v_rad_per_ps: filter.width(),
        omega_c_rad_per_ps: filter.center(),
    };
    let manifest = write_manifest(cfg, derived, &written)?;
    written.push(manifest);
    Ok(written)
}
