use mmbm_core::model::validate_model;
use mmbm_core::numkernel::{direction_distance, quadratic_residual, solve_stable_quadratic};
use mmbm_core::regenerative::{asymptotic_report, expected_sojourn, phi_limit, regen_cdf, rho_limit};
use mmbm_core::simulator::{aggregate, ks_against, regen_stats_compare, run_replication, SimConfig};
use mmbm_core::stationary::{
    evaluate_cdf, resampled_from_kernel, scalar_sticky_reference, standard_from_kernel, sticky_from_kernel, PhaseCdf,
    StationaryKernel,
};
use mmbm_core::{BoundaryVariant, Level, Matrix, MmbmModel, RowVector, StickySpec, Vector};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{meta_number, Csv};
use crate::{CliError, Command, Common};

/// Timer rates compared by the q-invariance check.
const Q_SWEEP: [f64; 3] = [0.25, 1.0, 4.0];
/// Default flip-flop rates for the asymptotic block of `solve`.
const ASYMPTOTIC_LAMBDAS: [f64; 3] = [1e3, 1e4, 1e5];
/// Scalar sticky cases `(μ, σ, ω)` always checked by `verify`.
const SCALAR_STICKY: [(f64, f64, f64); 3] = [(-1.0, 1.0, 1.0), (-0.5, 2.0, 0.3), (-2.0, 0.7, 1.5)];

/// Runs `cmd`, returning whatever output was produced alongside the
/// outcome, so partial output survives a failure.
pub fn dispatch(cmd: &Command) -> (String, Result<(), CliError>) {
    let mut csv = Csv::new();
    let result = match cmd {
        Command::Validate(c) => validate(c, &mut csv),
        Command::Solve(c) => solve(c, &mut csv),
        Command::Cdf(c) => cdf(c, &mut csv),
        Command::Simulate { common, compare } => simulate(common, *compare, &mut csv),
        Command::Verify { common, perturb_k } => verify(common, *perturb_k, &mut csv),
    };
    (csv.finish(), result)
}

struct Loaded {
    config: RunConfig,
    model: MmbmModel,
    q: f64,
}

fn load(c: &Common) -> Result<Loaded, CliError> {
    let config = RunConfig::from_path(&c.config)?;
    let model = config.model()?;
    let q = c.q.unwrap_or(config.analysis.q);
    if !(q.is_finite() && q > 0.0) {
        return Err(CliError::invalid("analysis.q", "must be finite and positive"));
    }
    Ok(Loaded { config, model, q })
}

impl Loaded {
    fn variant(&self, c: &Common) -> Result<BoundaryVariant, CliError> {
        let tag = match c.variant {
            Some(t) => t,
            None => self.config.variant_tag()?,
        };
        self.config.variant(tag, &self.model)
    }
}

fn row(v: &RowVector) -> Matrix {
    Matrix::from_row_slice(1, v.len(), v.as_slice())
}

fn column(v: &Vector) -> Matrix {
    Matrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn law_of(model: &MmbmModel, kern: &StationaryKernel, v: &BoundaryVariant) -> Result<PhaseCdf, CliError> {
    Ok(match v {
        BoundaryVariant::Standard => standard_from_kernel(model, kern)?.law,
        BoundaryVariant::Sticky(s) => sticky_from_kernel(model, kern, s)?,
        BoundaryVariant::Resampled(s) => resampled_from_kernel(model, kern, s)?,
    })
}

fn phase_header(m: usize) -> Vec<String> {
    let mut cols = vec!["x".to_string()];
    cols.extend((0..m).map(|i| format!("G_{i}")));
    cols.push("total".into());
    cols
}

fn validate(c: &Common, csv: &mut Csv) -> Result<(), CliError> {
    let l = load(c)?;
    let variants = l.config.available_variants(&l.model)?;
    // the selected variant must be buildable too
    l.variant(c)?;
    csv.meta("phases", [l.model.phases().to_string()]);
    csv.meta("variants", variants.iter().map(|v| v.tag().as_str()));
    csv.line(&format!("drift,{}", meta_number(l.model.drift())));
    csv.line(&format!("alpha,{}", l.model.alpha().iter().map(|x| meta_number(*x)).collect::<Vec<_>>().join(",")));
    csv.line(&format!("lambda_threshold,{}", meta_number(l.model.lambda_threshold())));
    Ok(())
}

fn solve(c: &Common, csv: &mut Csv) -> Result<(), CliError> {
    let l = load(c)?;
    let v = l.variant(c)?;
    let m = &l.model;
    let kern = StationaryKernel::new(m)?;
    let uq = solve_stable_quadratic(m.generator(), m.mu(), m.sigma(), l.q)?.u;
    let sojourn = expected_sojourn(&v, m, l.q)?;
    csv.meta("variant", [v.tag().as_str()]);
    csv.meta_numbers("q", [l.q]);
    csv.line("");
    csv.block("U0", &kern.u)?;
    csv.block("Uq", &uq)?;
    csv.block("K", &kern.k)?;
    csv.block("nu", &row(&kern.nu))?;
    csv.block("alpha", &row(m.alpha()))?;
    csv.block("ell", &row(&kern.ell(m)?))?;
    csv.block("rho", &row(&sojourn.rho))?;
    csv.block("m_vec", &column(&sojourn.m_vec))?;

    let lambdas: Vec<f64> = match c.lambda {
        Some(x) => vec![x],
        None => ASYMPTOTIC_LAMBDAS.to_vec(),
    };
    let report = asymptotic_report(&v, m, l.q, &lambdas)?;
    csv.meta("asymptotic", [report.len().to_string(), "5".to_string()]);
    csv.header(["lambda", "err_psi_scaled", "err_phi_scaled", "err_p0_scaled", "err_p1_scaled"]);
    for r in &report {
        csv.row("asymptotic report", [r.lambda, r.err_psi_scaled, r.err_phi_scaled, r.err_p0_scaled, r.err_p1_scaled])?;
    }
    Ok(())
}

fn cdf(c: &Common, csv: &mut Csv) -> Result<(), CliError> {
    let l = load(c)?;
    let v = l.variant(c)?;
    let xs = l.config.analysis.grid.levels()?;
    let kern = StationaryKernel::new(&l.model)?;
    let law = law_of(&l.model, &kern, &v)?;
    let levels: Vec<Level> = xs.iter().map(|x| Level::At(*x)).collect();
    let table = evaluate_cdf(&law, &levels)?;
    csv.meta("variant", [v.tag().as_str()]);
    csv.meta_numbers("mass_zero", law.mass_zero().iter().copied());
    csv.meta_numbers("marginal", law.marginal().iter().copied());
    csv.header(phase_header(l.model.phases()));
    for (x, g) in xs.iter().zip(&table.rows) {
        csv.row("cdf", std::iter::once(*x).chain(g.iter().copied()).chain([g.sum()]))?;
    }
    Ok(())
}

fn simulate(c: &Common, compare: bool, csv: &mut Csv) -> Result<(), CliError> {
    let l = load(c)?;
    let v = l.variant(c)?;
    let sim = l.config.simulation.as_ref().ok_or_else(|| CliError::invalid("simulation", "required by simulate"))?;
    let config = SimConfig {
        lambda: c.lambda.unwrap_or(sim.lambda),
        variant: v.clone(),
        q: l.q,
        horizon: sim.horizon,
        seed: c.seed.unwrap_or(sim.seed),
        grid: l.config.analysis.grid.levels()?,
        replications: sim.replications,
    };
    config.validate(&l.model).map_err(|e| CliError::Field { field: "simulation".into(), source: e })?;
    let tallies = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(&config, &l.model, r))
        .collect::<Result<Vec<_>, _>>()?;
    let emp = aggregate(&config, &tallies)?;

    csv.meta("seed", [config.seed.to_string()]);
    csv.meta_numbers("lambda", [config.lambda]);
    csv.meta("variant", [v.tag().as_str()]);
    csv.meta_numbers("horizon", [config.horizon]);
    csv.meta("replications", [config.replications.to_string()]);
    csv.meta_numbers("q", [config.q]);
    csv.meta("n_cycles", [emp.n_cycles.to_string()]);
    csv.meta("n_regenerations", [emp.n_regenerations.to_string()]);
    csv.meta_numbers("mean_cycle", [emp.mean_cycle]);
    csv.meta_numbers("mean_cycle_se", [emp.mean_cycle_se]);
    csv.meta_numbers("regen_phase_freq", emp.regen_phase_freq.iter().copied());
    csv.meta_numbers("regen_freq_se", emp.regen_freq_se.iter().copied());
    csv.meta_numbers("phase_marginal", emp.phase_marginal.iter().copied());
    csv.meta_numbers("zero_fraction", emp.zero_fraction.iter().copied());
    csv.header(phase_header(l.model.phases()));
    for (x, g) in emp.grid.iter().zip(&emp.occupation) {
        csv.row("occupation", std::iter::once(*x).chain(g.iter().copied()).chain([g.sum()]))?;
    }

    if compare {
        let kern = StationaryKernel::new(&l.model)?;
        let ks = ks_against(&emp, &law_of(&l.model, &kern, &v)?)?;
        csv.meta_numbers("ks_per_phase", ks.per_phase.iter().copied());
        csv.meta_numbers("ks_total", [ks.total]);
        let regen = regen_stats_compare(&emp, &expected_sojourn(&v, &l.model, config.q)?)?;
        csv.meta_numbers("regen_freq_dev", regen.freq_dev.iter().copied());
        csv.meta_numbers("regen_expected_cycle", [regen.expected_cycle]);
        csv.meta_numbers("regen_cycle_dev", [regen.cycle_dev]);
        csv.meta_numbers("regen_max_z", [regen.max_z()]);
    }
    Ok(())
}

/// Sup over grid levels and phases of `|a − b|`.
fn sup_distance(a: &PhaseCdf, b: &PhaseCdf, levels: &[Level]) -> Result<f64, CliError> {
    let ta = evaluate_cdf(a, levels)?;
    let tb = evaluate_cdf(b, levels)?;
    Ok(ta.rows.iter().zip(&tb.rows).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max))
}

struct Report<'a> {
    csv: &'a mut Csv,
    total: usize,
    failed: usize,
}

impl Report<'_> {
    fn check(&mut self, name: &str, tol: f64, err: f64) {
        // NaN fails
        let pass = err <= tol;
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        self.csv.line(&format!(
            "{name},{},{},{}",
            meta_number(tol),
            meta_number(err),
            if pass { "PASS" } else { "FAIL" }
        ));
    }

    fn info(&mut self, name: &str, values: &[f64]) {
        let vals: Vec<String> = values.iter().map(|x| meta_number(*x)).collect();
        self.csv.meta(&format!("info {name}"), vals);
    }
}

fn verify(c: &Common, perturb_k: Option<f64>, csv: &mut Csv) -> Result<(), CliError> {
    let l = load(c)?;
    let m = &l.model;
    let q = l.q;
    let variants = l.config.available_variants(m)?;
    let levels: Vec<Level> = l.config.analysis.grid.levels()?.into_iter().map(Level::At).collect();
    let mut kern = StationaryKernel::new(m)?;
    if let Some(eps) = perturb_k {
        kern.k.iter_mut().for_each(|x| *x += eps);
    }
    let n = m.phases();
    csv.header(["check", "tolerance", "error", "result"]);
    let mut r = Report { csv, total: 0, failed: 0 };

    // quadratic solver
    let u0 = solve_stable_quadratic(m.generator(), m.mu(), m.sigma(), 0.0)?;
    let uq = solve_stable_quadratic(m.generator(), m.mu(), m.sigma(), q)?;
    r.check("quadratic residual U(0)", 1e-10, quadratic_residual(m.generator(), m.mu(), m.sigma(), 0.0, &u0.u));
    r.check("quadratic residual U(q)", 1e-10, quadratic_residual(m.generator(), m.mu(), m.sigma(), q, &uq.u));
    let row_sums = (0..n).map(|i| u0.u.row(i).sum().abs()).fold(0.0, f64::max);
    r.check("U(0) row sums", 1e-10, row_sums);

    // closed forms against the regenerative form at several q
    for v in &variants {
        let closed = law_of(m, &kern, v)?;
        let mut worst = 0.0_f64;
        for qq in Q_SWEEP {
            worst = worst.max(sup_distance(&regen_cdf(v, m, qq)?, &closed, &levels)?);
        }
        r.check(&format!("q-invariance {}", v.tag()), 1e-8, worst);
        let rho = rho_limit(v, m, q)?;
        let phi = phi_limit(v, m, q)?;
        r.check(&format!("rho fixed point of Phi {}", v.tag()), 1e-10, (&rho * &phi - &rho).amax());
    }

    // the regulated law four ways
    let std = standard_from_kernel(m, &kern)?;
    let regen = regen_cdf(&BoundaryVariant::Standard, m, q)?;
    r.check("regulated law: alpha form", 1e-8, sup_distance(&std.law, &std.alpha_form()?, &levels)?);
    r.check("regulated law: ell form", 1e-8, sup_distance(&std.law, &std.ell_form()?, &levels)?);
    r.check("regulated law: regenerative form", 1e-8, sup_distance(&std.law, &regen, &levels)?);
    r.check("regulated marginal is alpha", 1e-10, (std.law.marginal() - m.alpha()).amax());

    // regulator identities
    let ell = kern.ell(m)?;
    r.check("sum of ell is -alpha mu", 1e-10, (ell.sum() + m.drift()).abs());
    r.check("ell U = 0", 1e-12, (&ell * &kern.u).amax());
    r.check("ell collinear with nu Theta", 1e-10, direction_distance(&ell, &(&kern.nu * m.theta())));
    r.check("alpha Theta K collinear with nu", 1e-10, direction_distance(&(m.alpha() * m.theta() * &kern.k), &kern.nu));

    // boundary occupation directions
    for v in &variants {
        let soj = expected_sojourn(v, m, q)?;
        let atom = &soj.rho * &soj.m_zero;
        match v {
            BoundaryVariant::Standard => r.check("standard M(0) = 0", 0.0, soj.m_zero.amax()),
            BoundaryVariant::Sticky(s) => {
                let a = s.a();
                let nu_a = RowVector::from_fn(n, |_, j| kern.nu[j] / a[j]);
                r.check("sticky rho M(0) collinear with nu A^-1", 1e-10, direction_distance(&atom, &nu_a));
                let w = &soj.rho
                    * (Matrix::from_diagonal(&a.map(|x| q / x)) - m.theta() * &uq.u)
                        .try_inverse()
                        .ok_or(mmbm_core::Error::Singular { what: "qA^-1 - Theta U(q)" })?;
                r.check(
                    "sticky rho (qA^-1 - Theta U(q))^-1 collinear with nu",
                    1e-10,
                    direction_distance(&w, &kern.nu),
                );
                // Two normalisers for G = c rho M(x) are in circulation;
                // report each with the total mass it produces.
                let rho_m = soj.mean_cycle();
                let full = (&soj.rho * soj.eval(Level::Infinity)?).sum();
                let mass = |c: f64| c * full;
                let (c1, c2) = (1.0 / rho_m, 2.0 / rho_m);
                r.info("sticky normaliser 1/(rho m) and total mass", &[c1, mass(c1)]);
                r.info("sticky normaliser 2/(rho m) and total mass", &[c2, mass(c2)]);
            }
            BoundaryVariant::Resampled(s) => {
                let nat_inv = (-s.a_tilde()).try_inverse().ok_or(mmbm_core::Error::Singular { what: "-Atilde" })?;
                r.check(
                    "resampled rho M(0) collinear with beta (-Atilde)^-1",
                    1e-10,
                    direction_distance(&atom, &(s.beta() * nat_inv)),
                );
            }
        }
    }

    // scalar oracles
    let mut worst = 0.0_f64;
    for (mu, sigma, omega) in SCALAR_STICKY {
        let scalar = validate_model(Matrix::zeros(1, 1), Vector::from_element(1, mu), Vector::from_element(1, sigma))?;
        let skern = StationaryKernel::new(&scalar)?;
        let spec = StickySpec::new(Vector::from_element(1, omega / sigma), 1)?;
        let law = sticky_from_kernel(&scalar, &skern, &spec)?;
        for k in 0..50 {
            let x = 5.0 * k as f64 / 49.0;
            let got = law.eval(Level::At(x))?[0];
            worst = worst.max((got - scalar_sticky_reference(mu, sigma, omega, x)?).abs());
        }
    }
    r.check("scalar sticky reference cases", 1e-10, worst);
    if n == 1 {
        let (mu, sigma) = (m.mu()[0], m.sigma()[0]);
        for v in &variants {
            let omega = match v {
                BoundaryVariant::Standard => f64::INFINITY,
                BoundaryVariant::Sticky(s) => s.a()[0] * sigma,
                BoundaryVariant::Resampled(_) => continue,
            };
            let law = law_of(m, &kern, v)?;
            let mut worst = 0.0_f64;
            for lv in &levels {
                let Level::At(x) = *lv else { continue };
                let want = if omega.is_infinite() {
                    1.0 - (2.0 * mu * x / (sigma * sigma)).exp()
                } else {
                    scalar_sticky_reference(mu, sigma, omega, x)?
                };
                worst = worst.max((law.eval(*lv)?[0] - want).abs());
            }
            r.check(&format!("scalar closed form {}", v.tag()), 1e-10, worst);
        }
    }

    if r.failed > 0 {
        return Err(CliError::VerifyFailed { failed: r.failed, total: r.total });
    }
    Ok(())
}
