//! One runner per subcommand. Each returns a [`Report`] whose summary holds
//! the pass/fail criteria with their thresholds.

use std::path::Path;

use ndarray::Array2;

use dysonprop::amplitude::{
    build_lattice, k0_grid, k_exact_grid, k_truncated_grid, k_via_relation_extrapolated, k_via_relation_grid,
    load_lattice, max_grid_error, LatticeSpec,
};
use dysonprop::divdiff::{identity_suite, IDENTITY_POOL};
use dysonprop::green::{
    complete_resolvent_direct, damped_green_oracle, dyson_partial, forward_fourier, inverse_fourier_check,
    ResolventQuery,
};
use dysonprop::linalg;
use dysonprop::model::{load_model, random_model, scale_coupling, CouplingScale, SpectralModel};
use dysonprop::oracle::{dyson_term_quadrature, exact_evolution, MAX_QUADRATURE_ORDER};
use dysonprop::propagator::{
    a_matrix, epsilon_form_extrapolated, halving_ladder, truncated_evolution, OperatorMatrix, TruncationSpec,
};
use dysonprop::quadrature::QuadratureSpec;
use dysonprop::{Sign, C64};

use crate::args::*;
use crate::report::{Criterion, Report, Rule, Value};
use crate::CliError;

pub fn run_command(cmd: &Command) -> Result<Report, CliError> {
    match cmd {
        Command::IdentityCheck(a) => identity_check(a),
        Command::Propagate(a) => propagate(a),
        Command::Converge(a) => converge(a),
        Command::DysonCheck(a) => dyson_check(a),
        Command::GreenFt(a) => green_ft(a),
        Command::Amplitude(a) => amplitude(a),
        Command::Selftest(a) => selftest(a),
    }
}

fn read_model(path: &Path) -> Result<SpectralModel, CliError> {
    let text = std::fs::read_to_string(path)?;
    load_model(&text).map_err(|e| CliError::context(format!("model {}", path.display()), e))
}

fn model_from(args: &ModelArgs) -> Result<SpectralModel, CliError> {
    match &args.model {
        Some(p) => read_model(p),
        None => Ok(random_model(args.dim as usize, args.seed, 1.0)?),
    }
}

fn describe_model(report: &mut Report, model: &SpectralModel) {
    report.param("model", model.label().to_owned());
    report.param("dim", model.dim());
}

fn two_level_or(path: &Option<std::path::PathBuf>) -> Result<SpectralModel, CliError> {
    match path {
        Some(p) => read_model(p),
        None => Ok(SpectralModel::two_level(1.0, 1.0)?),
    }
}

fn scaled(model: &SpectralModel, lambda: f64) -> Result<SpectralModel, CliError> {
    Ok(scale_coupling(model, CouplingScale::new(lambda)?))
}

/// Appends one row per matrix entry.
fn push_matrix_rows(report: &mut Report, prefix: &[Value], computed: &OperatorMatrix, oracle: &OperatorMatrix) {
    let d = computed.dim();
    for r in 0..d {
        for c in 0..d {
            let mut inputs = prefix.to_vec();
            inputs.push(Value::from(r));
            inputs.push(Value::from(c));
            report.push_row(inputs, computed.entries[[r, c]], oracle.entries[[r, c]]);
        }
    }
}

pub fn identity_check(a: &IdentityArgs) -> Result<Report, CliError> {
    let mut report = Report::new("identity-check", &["nodes", "k"]);
    report.param("pool", IDENTITY_POOL.iter().map(i64::to_string).collect::<Vec<_>>().join(" "));
    report.param("max_nodes", a.max_nodes);
    report.param("tol", a.tol);
    let cases = identity_suite(&IDENTITY_POOL, a.max_nodes as usize)?;
    let mut lists = 0u64;
    let mut exact_failures = 0u64;
    let mut worst: f64 = 0.0;
    for case in &cases {
        if case.k == 0 {
            lists += 1;
        }
        if !case.exact_holds() {
            exact_failures += 1;
        }
        worst = worst.max(case.float_error());
        let nodes = case.nodes.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
        report.push_row(
            vec![Value::Text(nodes), Value::from(case.k as u64)],
            case.float,
            C64::new(case.expected as f64, 0.0),
        );
    }
    report.criterion(Criterion::new("node lists covered", Rule::AtLeast, lists as f64, a.min_lists as f64));
    report.criterion(Criterion::at_most("exact-mode mismatches", exact_failures as f64, 0.0));
    report.criterion(Criterion::at_most("float-mode max abs error", worst, a.tol));
    Ok(report)
}

pub fn propagate(a: &PropagateArgs) -> Result<Report, CliError> {
    let model = scaled(&model_from(&a.model)?, a.lambda)?;
    let mut report = Report::new("propagate", &["check", "l", "row", "col"]);
    describe_model(&mut report, &model);
    report.param("lambda", a.lambda);
    report.param("t", a.t);
    report.param("order", a.order);
    report.param("quad_points", a.quad_points);
    report.param("eps", a.eps);
    report.param("sign", a.sign.symbol());
    report.param("tol", a.tol);
    report.param("eps_tol", a.eps_tol);

    let max_l = a.order.min(MAX_QUADRATURE_ORDER);
    for l in 0..=max_l {
        let computed = a_matrix(&model, l, a.t)?;
        let oracle = dyson_term_quadrature(&model, l, a.t, a.quad_points)?;
        push_matrix_rows(&mut report, &[Value::from("term"), Value::from(l)], &computed, &oracle);
    }
    let term_err = report.max_error_where("check", "term");
    report.criterion(Criterion::at_most(format!("series terms l<={max_l} vs quadrature"), term_err, a.tol));

    let spec = TruncationSpec::new(a.order);
    let direct = truncated_evolution(&model, spec, a.t)?;
    let ext = epsilon_form_extrapolated(&model, spec, a.t, &halving_ladder(a.eps), a.sign)?;
    push_matrix_rows(&mut report, &[Value::from("eps-form"), Value::from(a.order)], &ext, &direct);
    let eps_err = report.max_error_where("check", "eps-form");
    report.criterion(Criterion::at_most("extrapolated resolvent-product form vs truncated series", eps_err, a.eps_tol));
    Ok(report)
}

pub fn converge(a: &ConvergeArgs) -> Result<Report, CliError> {
    let base = two_level_or(&a.model)?;
    let mut report = Report::new("converge", &["lambda", "order", "row", "col"]);
    describe_model(&mut report, &base);
    report.param("lambda", a.lambda);
    report.param("t", a.t);
    report.param("max_order", a.order);
    report.param("ratio_tol", a.ratio_tol);

    let lambdas = [a.lambda, a.lambda / 2.0];
    let mut errors = vec![[0.0; 2]; a.order as usize + 1];
    let mut defects = vec![[0.0; 2]; a.order as usize + 1];
    for (k, &lam) in lambdas.iter().enumerate() {
        let model = scaled(&base, lam)?;
        let exact = exact_evolution(&model, a.t)?;
        for n in 1..=a.order as usize {
            let u = truncated_evolution(&model, TruncationSpec::new(n), a.t)?;
            push_matrix_rows(&mut report, &[Value::from(lam), Value::from(n)], &u, &exact);
            errors[n][k] = u.max_abs_diff(&exact);
            defects[n][k] = u.unitarity_defect();
        }
    }
    for n in 1..=a.order as usize {
        let target = 2f64.powi(n as i32 + 1);
        let rule = Rule::RatioWithin { target };
        report.criterion(Criterion::new(format!("error ratio N={n}"), rule, errors[n][0] / errors[n][1], a.ratio_tol));
        report.criterion(Criterion::new(
            format!("unitarity-defect ratio N={n}"),
            rule,
            defects[n][0] / defects[n][1],
            a.ratio_tol,
        ));
    }
    Ok(report)
}

pub fn dyson_check(a: &DysonArgs) -> Result<Report, CliError> {
    let raw = model_from(&a.model)?;
    let energy = a.energy.unwrap_or_else(|| raw.energies().iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0);
    let q = ResolventQuery::new(energy, a.sign, a.eps)?;
    let rho0 = dyson_partial(&raw, q, 0).rho;
    let model = if rho0 > 0.0 { scaled(&raw, a.rho / rho0)? } else { raw };

    let mut report = Report::new("dyson-check", &["order", "row", "col"]);
    describe_model(&mut report, &model);
    report.param("energy", energy);
    report.param("eps", a.eps);
    report.param("sign", a.sign.symbol());
    report.param("target_rho", a.rho);
    report.param("order", a.order);
    report.param("tol", a.tol);

    let direct = complete_resolvent_direct(&model, q)?;
    let mut worst_bound_ratio: f64 = 0.0;
    let mut rho = 0.0;
    for n in 0..=a.order {
        let p = dyson_partial(&model, q, n);
        rho = p.rho;
        let err = linalg::spectral_norm(&(&p.resolvent.entries - &direct.entries));
        if let Some(bound) = p.tail_bound() {
            worst_bound_ratio = worst_bound_ratio.max(err / bound);
        } else {
            worst_bound_ratio = f64::INFINITY;
        }
        if n == a.order {
            push_matrix_rows(&mut report, &[Value::from(n)], &p.resolvent, &direct);
            report.criterion(Criterion::at_most(format!("||partial(N={n}) - direct||"), err, a.tol));
        }
    }
    report.param("rho", rho);
    report.criterion(Criterion::at_most("max error / geometric tail bound", worst_bound_ratio, 1.0));
    Ok(report)
}

pub const INVERSE_ENERGIES: [f64; 3] = [-1.0, 0.5, 2.0];
pub const FORWARD_TIMES: [f64; 6] = [-1.5, -1.0, -0.5, 0.5, 1.0, 1.5];

pub fn green_ft(a: &GreenArgs) -> Result<Report, CliError> {
    let model = scaled(&two_level_or(&a.model)?, a.lambda)?;
    let mut report = Report::new("green-ft", &["check", "x", "row", "col"]);
    describe_model(&mut report, &model);
    report.param("lambda", a.lambda);
    report.param("order", a.order);
    report.param("eps", a.eps);
    report.param("sign", a.sign.symbol());
    report.param("quad_points", a.quad_points);
    report.param("quad_domain", a.quad_domain);
    report.param("energy_points", a.energy_points);
    report.param("energy_window", a.energy_window);
    report.param("tol", a.tol);
    report.param("causality_tol", a.causality_tol);

    let spec = TruncationSpec::new(a.order);
    let time_quad = QuadratureSpec::gauss(0.0, a.quad_domain, a.quad_points)?;
    for &energy in &INVERSE_ENERGIES {
        let q = ResolventQuery::new(energy, a.sign, a.eps)?;
        let ft = inverse_fourier_check(&model, spec, energy, a.sign, a.eps, time_quad)?;
        let dyson = dyson_partial(&model, q, a.order).resolvent;
        push_matrix_rows(&mut report, &[Value::from("inverse"), Value::from(energy)], &ft, &dyson);
    }
    report.criterion(Criterion::at_most(
        "time-to-energy transform vs Dyson partial sum",
        report.max_error_where("check", "inverse"),
        a.tol,
    ));

    let center = model.hamiltonian().diag().iter().map(|z| z.re).sum::<f64>() / model.dim() as f64;
    let energy_quad = QuadratureSpec::gauss(center - a.energy_window, center + a.energy_window, a.energy_points)?;
    let mut acausal: f64 = 0.0;
    for &tau in &FORWARD_TIMES {
        let g = forward_fourier(&model, energy_quad, tau, 0.0, a.sign, a.eps, None)?;
        let oracle = damped_green_oracle(&model, tau, a.sign, a.eps)?;
        push_matrix_rows(&mut report, &[Value::from("forward"), Value::from(tau)], &g, &oracle);
        if a.sign.factor() * tau < 0.0 {
            acausal = acausal.max(linalg::max_abs(&g.entries));
        }
    }
    report.criterion(Criterion::at_most(
        "energy-to-time transform vs damped propagator",
        report.max_error_where("check", "forward"),
        a.causality_tol,
    ));
    report.criterion(Criterion::at_most("max |G| on the acausal side", acausal, a.causality_tol));
    Ok(report)
}

fn push_grid(report: &mut Report, m: usize, route: &str, lam: f64, computed: &Array2<C64>, oracle: &Array2<C64>) {
    for xb in 0..m {
        for xa in 0..m {
            let inputs = vec![Value::from(route), Value::from(lam), Value::from(xb), Value::from(xa)];
            report.push_row(inputs, computed[[xb, xa]], oracle[[xb, xa]]);
        }
    }
}

/// Six-point lattice with a unit Gaussian well as the perturbing potential.
pub fn default_lattice() -> LatticeSpec {
    let m = 6;
    let mut spec = LatticeSpec::free(m, 0.5, 1.0);
    let centre = spec.x(m - 1) / 2.0;
    for n in 0..m {
        let x = spec.x(n) - centre;
        spec.v1[n] = -(-x * x).exp();
    }
    spec
}

pub fn amplitude(a: &AmplitudeArgs) -> Result<Report, CliError> {
    let base = match &a.lattice {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            load_lattice(&text).map_err(|e| CliError::context(format!("lattice {}", p.display()), e))?
        }
        None => default_lattice(),
    };
    let mut report = Report::new("amplitude", &["route", "lambda", "xb", "xa"]);
    report.param("M", base.m);
    report.param("h", base.h);
    report.param("mass", base.mass);
    report.param("lambda", a.lambda);
    report.param("order", a.order);
    report.param("eps", a.eps);
    report.param("t", a.t);
    report.param("ratio_tol", a.ratio_tol);
    report.param("reduction_tol", a.reduction_tol);

    let spec = TruncationSpec::new(a.order);
    let ladder = halving_ladder(a.eps);
    let m = base.m;
    let mut relation_err = Vec::new();
    let mut direct_err = Vec::new();
    for lam in [a.lambda, a.lambda / 2.0] {
        let sys = build_lattice(base.with_coupling(CouplingScale::new(lam)?))?;
        let exact = k_exact_grid(&sys, a.t, 0.0)?;
        let relation = k_via_relation_extrapolated(&sys, spec, &ladder, a.t, 0.0)?;
        let direct = k_truncated_grid(&sys, spec, a.t, 0.0)?;
        relation_err.push(max_grid_error(&relation, &exact));
        direct_err.push(max_grid_error(&direct, &exact));
        push_grid(&mut report, m, "relation", lam, &relation, &exact);
        push_grid(&mut report, m, "direct", lam, &direct, &exact);
    }
    let target = 2f64.powi(a.order as i32 + 1);
    let rule = Rule::RatioWithin { target };
    report.criterion(Criterion::new(
        "kernel-relation error ratio under lambda halving",
        rule,
        relation_err[0] / relation_err[1],
        a.ratio_tol,
    ));
    report.criterion(Criterion::new(
        "direct-truncation error ratio under lambda halving",
        rule,
        direct_err[0] / direct_err[1],
        a.ratio_tol,
    ));

    let free = build_lattice(base.with_coupling(CouplingScale::new(0.0)?))?;
    let k0 = k0_grid(&free, a.t)?;
    let routes = [
        ("free-relation", k_via_relation_grid(&free, spec, a.eps, a.t, 0.0)?),
        ("free-direct", k_truncated_grid(&free, spec, a.t, 0.0)?),
        ("free-exact", k_exact_grid(&free, a.t, 0.0)?),
    ];
    let mut reduction: f64 = 0.0;
    for (route, grid) in &routes {
        push_grid(&mut report, m, route, 0.0, grid, &k0);
        reduction = reduction.max(max_grid_error(grid, &k0));
    }
    report.criterion(Criterion::at_most("free reduction to K0 (v1 = 0)", reduction, a.reduction_tol));
    Ok(report)
}

/// Every check at reduced size, combined into one report keyed by command.
pub fn selftest(a: &SelftestArgs) -> Result<Report, CliError> {
    let model = ModelArgs { model: None, seed: a.seed, dim: 3 };
    let runs = vec![
        identity_check(&IdentityArgs { max_nodes: 4, tol: 1e-12, min_lists: 500 })?,
        propagate(&PropagateArgs {
            model: model.clone(),
            lambda: 0.5,
            t: 1.0,
            order: 2,
            quad_points: 64,
            eps: 1e-2,
            sign: Sign::Retarded,
            tol: 1e-6,
            eps_tol: 1e-6,
        })?,
        converge(&ConvergeArgs { model: None, lambda: 0.1, t: 1.0, order: 1, ratio_tol: 0.25 })?,
        dyson_check(&DysonArgs {
            model: ModelArgs { dim: 4, ..model },
            rho: 0.5,
            energy: None,
            eps: 1e-3,
            sign: Sign::Retarded,
            order: 40,
            tol: 1e-8,
        })?,
        green_ft(&GreenArgs {
            model: None,
            lambda: 1.0,
            order: 1,
            eps: 0.1,
            sign: Sign::Retarded,
            quad_points: 2000,
            quad_domain: 200.0,
            energy_points: 4000,
            energy_window: 10.0,
            tol: 1e-5,
            causality_tol: 1e-3,
        })?,
        amplitude(&AmplitudeArgs {
            lattice: None,
            lambda: 0.1,
            order: 1,
            eps: 1e-2,
            t: 1.0,
            ratio_tol: 0.3,
            reduction_tol: 1e-12,
        })?,
    ];

    let mut report = Report::new("selftest", &["command", "case"]);
    report.param("seed", a.seed);
    for run in runs {
        for p in &run.params {
            report.param(&format!("{}.{}", run.command, p.key), p.value.clone());
        }
        for row in &run.rows {
            let case = row
                .inputs
                .iter()
                .map(|e| format!("{}={}", e.key, e.value.render()))
                .collect::<Vec<_>>()
                .join(";");
            report.push_row(vec![Value::from(run.command.as_str()), Value::Text(case)], row.computed, row.oracle);
        }
        for c in run.summary {
            report.criterion(Criterion { name: format!("{}: {}", run.command, c.name), ..c });
        }
    }
    Ok(report)
}
