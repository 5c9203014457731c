//! Command runners: typed payload in, JSON payload + CSV + verdict out.
//!
//! Each runner deserializes its payload strictly, calls into the library,
//! and reshapes the result into the common report envelope.  Numeric policy
//! (sample counts, method overrides, ratio caps) comes from the spec;
//! runners add no hidden tolerances of their own.

use serde::Deserialize;
use serde::Serialize;
use serde_json::{Map, Value};

use curvlab::integrate::{radon_apply, sublevel_eval, ScanOutcome};
use curvlab::poly::{format_rat, parse_rat, rat_to_f64, MultiPoly, Rat};
use curvlab::verify::{self, InequalityReport, ScanKind};
use curvlab::weights::{
    first_coordinate_ell, rotcurv1_exact, rotcurv1_f64, rotcurv2_exact, rotcurv2_f64,
};

use crate::report::{csv_table, RunOutput};
use crate::spec::{
    self, build_opts, density, CliResult, Fail, MapDto, PhaseDto, RegionDto, WeightDto,
};

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| Fail::Spec(format!("report serialization failed: {e}")))
}

/// Absolute value of an optional density polynomial, defaulting to 1.
fn density_fn(poly: &Option<MultiPoly>) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |z: &[f64]| poly.as_ref().map_or(1.0, |p| p.eval_f64(z).abs())
}

// ---------------------------------------------------------------------------
// weight-eval
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightEvalSpec {
    #[serde(default)]
    out_stem: Option<String>,
    /// Polynomial map for the map-attached functionals.
    #[serde(default)]
    map: Option<MapDto>,
    /// Phase system for the rotational functionals.
    #[serde(default)]
    phase: Option<PhaseDto>,
    weight: WeightDto,
    /// Evaluation points as exact rational coordinates.
    points: Vec<Vec<String>>,
}

/// Evaluates one weight functional at a list of rational points, reporting
/// the exact value (when the functional is exactly representable) and a
/// float value side by side.
pub fn weight_eval(value: &Value, _seed: u64) -> CliResult<RunOutput> {
    let sp: WeightEvalSpec = spec::payload(value)?;
    if sp.map.is_some() && sp.phase.is_some() {
        return Err(Fail::Spec("give either `map` or `phase`, not both".into()));
    }

    let points: Vec<Vec<Rat>> =
        sp.points.iter().map(|p| spec::rat_row(p)).collect::<CliResult<_>>()?;
    let mut results = Vec::with_capacity(points.len());

    if sp.weight.needs_phase() {
        let phase = sp
            .phase
            .as_ref()
            .ok_or_else(|| Fail::Spec("rotational weights need a `phase`".into()))?
            .build()?;
        let rot2 = matches!(sp.weight, WeightDto::Rotcurv2);
        for pt in &points {
            let floats: Vec<f64> = pt.iter().map(rat_to_f64).collect();
            let (exact, float) = if rot2 {
                (rotcurv2_exact(&phase, pt)?, rotcurv2_f64(&phase, &floats)?)
            } else {
                (rotcurv1_exact(&phase, pt)?, rotcurv1_f64(&phase, &floats)?)
            };
            results.push((pt, Some(exact), float));
        }
    } else {
        let cm = sp
            .map
            .as_ref()
            .ok_or_else(|| Fail::Spec("map-attached weights need a `map`".into()))?
            .build()?;
        let prepared = sp.weight.build()?.prepare(&cm)?;
        for pt in &points {
            let floats: Vec<f64> = pt.iter().map(rat_to_f64).collect();
            let float = prepared.eval_f64(&floats)?;
            // The exact path refuses functionals whose net exponent is not
            // an integer; the float value stands alone there.
            let exact = prepared.eval_exact(pt).ok();
            results.push((pt, exact, float));
        }
    }

    let mut payload = Map::new();
    payload.insert(
        "results".into(),
        Value::Array(
            results
                .iter()
                .map(|(pt, exact, float)| {
                    let mut row = Map::new();
                    row.insert(
                        "point".into(),
                        Value::Array(pt.iter().map(|c| Value::from(format_rat(c))).collect()),
                    );
                    row.insert(
                        "exact".into(),
                        exact.as_ref().map_or(Value::Null, |e| Value::from(format_rat(e))),
                    );
                    row.insert("value".into(), Value::from(*float));
                    Value::Object(row)
                })
                .collect(),
        ),
    );

    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(pt, exact, float)| {
            vec![
                pt.iter().map(format_rat).collect::<Vec<_>>().join(" "),
                exact.as_ref().map(format_rat).unwrap_or_default(),
                float.to_string(),
            ]
        })
        .collect();

    Ok(RunOutput {
        stem: sp.out_stem,
        payload,
        csv: csv_table("point,exact,value", &rows),
        pass: true,
        summary: vec![format!("weight-eval: {} point(s)", results.len())],
    })
}

// ---------------------------------------------------------------------------
// identity-suite
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentitySuiteSpec {
    #[serde(default)]
    out_stem: Option<String>,
    /// Random instances per identity.
    trials: u32,
    /// When set, runs the suite with this identity deliberately flawed and
    /// passes only if exactly that identity fails — a self-test of the
    /// suite's power to detect wrong formulas.
    #[serde(default)]
    negative_control: Option<String>,
}

pub fn identity_suite(value: &Value, seed: u64) -> CliResult<RunOutput> {
    let sp: IdentitySuiteSpec = spec::payload(value)?;
    let summary = match &sp.negative_control {
        None => verify::identity_suite(seed, sp.trials),
        Some(target) => verify::identity_suite_negative_control(seed, sp.trials, target),
    };

    let failing: Vec<&str> = summary.failing().iter().map(|o| o.name.as_str()).collect();
    let pass = match &sp.negative_control {
        None => summary.all_pass(),
        Some(target) => failing == [target.as_str()],
    };

    let mut lines = vec![format!(
        "identity suite: {} identities, {} failing (trials {})",
        summary.outcomes.len(),
        failing.len(),
        sp.trials
    )];
    for o in summary.failing() {
        lines.push(format!(
            "  failing: {} — {}",
            o.name,
            o.reproducer.as_deref().unwrap_or("no reproducer recorded")
        ));
    }
    if let Some(target) = &sp.negative_control {
        lines.push(format!(
            "negative control: target {target:?} {}",
            if pass { "isolated by the suite" } else { "NOT isolated" }
        ));
    }

    let mut payload = Map::new();
    payload.insert("trials".into(), Value::from(sp.trials));
    payload.insert(
        "negative_control".into(),
        sp.negative_control.as_deref().map_or(Value::Null, Value::from),
    );
    payload.insert("outcomes".into(), to_value(&summary.outcomes)?);

    let rows: Vec<Vec<String>> = summary
        .outcomes
        .iter()
        .map(|o| vec![o.name.clone(), o.trials.to_string(), o.failures.to_string()])
        .collect();

    Ok(RunOutput {
        stem: sp.out_stem,
        payload,
        csv: csv_table("identity,trials,failures", &rows),
        pass,
        summary: lines,
    })
}

// ---------------------------------------------------------------------------
// oberlin-scan
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OberlinScanSpec {
    #[serde(default)]
    out_stem: Option<String>,
    map: MapDto,
    /// Which scan bound to check: `first-weight`, `second-weight`,
    /// `third-weight`, or the weightless control `unit-weight`.
    kind: String,
    /// Functional for the third-weight scan; defaults to the first
    /// coordinate.
    #[serde(default)]
    ell: Option<Vec<String>>,
    region: RegionDto,
    /// Candidate budget per scan stage.
    budget: u32,
    #[serde(default)]
    n_samples: Option<u64>,
    #[serde(default)]
    method: Option<String>,
    #[serde(default)]
    clip_ceiling: Option<f64>,
    #[serde(default)]
    ratio_cap: Option<f64>,
    /// When true the check passes only if the scan flags divergence —
    /// for degenerate control instances.
    #[serde(default)]
    expect_divergence: bool,
}

pub fn oberlin_scan(value: &Value, seed: u64) -> CliResult<RunOutput> {
    let sp: OberlinScanSpec = spec::payload(value)?;
    let cm = sp.map.build()?;
    let region = sp.region.build()?;
    let opts = build_opts(seed, sp.n_samples, sp.method.as_deref(), sp.clip_ceiling)?;
    let ratio_cap = sp.ratio_cap.unwrap_or(1e6);

    let kind = match sp.kind.as_str() {
        "first-weight" => ScanKind::FirstWeight,
        "second-weight" => ScanKind::SecondWeight,
        "third-weight" => {
            let ell = match &sp.ell {
                Some(row) => spec::rat_row(row)?,
                None => first_coordinate_ell(cm.n()),
            };
            ScanKind::ThirdWeight { ell }
        }
        "unit-weight" => ScanKind::UnitWeight,
        other => {
            return Err(Fail::Spec(format!(
                "unknown scan kind {other:?}; use first-weight, second-weight, third-weight, \
                 or unit-weight"
            )))
        }
    };
    if sp.ell.is_some() && sp.kind != "third-weight" {
        return Err(Fail::Spec("`ell` only applies to the third-weight scan".into()));
    }

    let (report, outcome): (InequalityReport, ScanOutcome) =
        verify::check_scan_inequality(&cm, &kind, &region, sp.budget, &opts, ratio_cap)?;
    let pass = if sp.expect_divergence { outcome.diverging } else { report.pass };

    let mut lines = vec![format!(
        "supremum scan ({}): sup {:.6e}, ratio {:.6e}, diverging {}",
        sp.kind, outcome.sup_estimate, report.ratio, outcome.diverging
    )];
    if sp.expect_divergence {
        lines.push(format!(
            "divergence control: {}",
            if pass { "flagged as expected" } else { "NOT flagged" }
        ));
    }

    let mut payload = Map::new();
    payload.insert("kind".into(), Value::from(sp.kind.clone()));
    payload.insert("expect_divergence".into(), Value::from(sp.expect_divergence));
    payload.insert("report".into(), to_value(&report)?);
    payload.insert("sup_estimate".into(), Value::from(outcome.sup_estimate));
    payload.insert("diverging".into(), Value::from(outcome.diverging));
    payload.insert("trace".into(), to_value(&outcome.trace)?);

    let rows: Vec<Vec<String>> = outcome
        .trace
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                i.to_string(),
                s.stage.clone(),
                s.log_abs_det.to_string(),
                s.objective.to_string(),
                s.clipped_fraction.to_string(),
                s.diverging.to_string(),
            ]
        })
        .collect();

    Ok(RunOutput {
        stem: sp.out_stem,
        payload,
        csv: csv_table("step,stage,log_abs_det,objective,clipped_fraction,diverging", &rows),
        pass,
        summary: lines,
    })
}

// ---------------------------------------------------------------------------
// inequality-check
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InequalityCheckSpec {
    #[serde(default)]
    out_stem: Option<String>,
    /// `first` or `second`.
    order: String,
    phase: PhaseDto,
    region: RegionDto,
    /// Left density polynomial in the `d_l` left variables; its absolute
    /// value is used.  Defaults to 1.
    #[serde(default)]
    f: Option<String>,
    /// Right density polynomial in the `d_r` right variables.
    #[serde(default)]
    g: Option<String>,
    #[serde(default)]
    n_samples: Option<u64>,
    #[serde(default)]
    method: Option<String>,
    #[serde(default)]
    clip_ceiling: Option<f64>,
    #[serde(default)]
    ratio_cap: Option<f64>,
    /// Baseline ratio from an earlier audited run; the check then also
    /// requires the fresh ratio to stay within `ratio_tolerance` of it.
    #[serde(default)]
    frozen_ratio: Option<f64>,
    /// Relative tolerance for the frozen-ratio comparison (default 0.1).
    #[serde(default)]
    ratio_tolerance: Option<f64>,
}

pub fn inequality_check(value: &Value, seed: u64) -> CliResult<RunOutput> {
    let sp: InequalityCheckSpec = spec::payload(value)?;
    let ps = sp.phase.build()?;
    let region = sp.region.build()?;
    let opts = build_opts(seed, sp.n_samples, sp.method.as_deref(), sp.clip_ceiling)?;
    let ratio_cap = sp.ratio_cap.unwrap_or(1.0);

    let f_poly = density(sp.f.as_deref(), ps.d_l)?;
    let g_poly = density(sp.g.as_deref(), ps.d_r)?;
    let f = density_fn(&f_poly);
    let g = density_fn(&g_poly);

    let report = match sp.order.as_str() {
        "first" => verify::check_first_weight_inequality(&ps, &region, f, g, &opts, ratio_cap)?,
        "second" => verify::check_second_weight_inequality(&ps, &region, f, g, &opts, ratio_cap)?,
        other => {
            return Err(Fail::Spec(format!(
                "unknown inequality order {other:?}; use \"first\" or \"second\""
            )))
        }
    };

    let tolerance = sp.ratio_tolerance.unwrap_or(0.1);
    let frozen_gap = match sp.frozen_ratio {
        None => None,
        Some(fr) if fr == 0.0 => {
            return Err(Fail::Spec("frozen_ratio must be nonzero".into()));
        }
        Some(fr) => Some((report.ratio / fr - 1.0).abs()),
    };
    let frozen_ok = frozen_gap.map_or(true, |gap| gap <= tolerance);
    let pass = report.pass && frozen_ok;

    let mut lines = vec![format!(
        "{} inequality: ratio {:.6} (cap {}), lhs {:.6e} ± {:.2e}",
        sp.order, report.ratio, report.ratio_cap, report.lhs.value, report.lhs.std_error
    )];
    if let Some(gap) = frozen_gap {
        lines.push(format!(
            "frozen baseline: relative gap {:.4} (tolerance {tolerance}) — {}",
            gap,
            if frozen_ok { "within" } else { "exceeded" }
        ));
    }

    let mut payload = Map::new();
    payload.insert("order".into(), Value::from(sp.order.clone()));
    payload.insert("report".into(), to_value(&report)?);
    payload.insert(
        "frozen_ratio".into(),
        sp.frozen_ratio.map_or(Value::Null, Value::from),
    );
    payload.insert(
        "frozen_gap".into(),
        frozen_gap.map_or(Value::Null, Value::from),
    );
    payload.insert("ratio_tolerance".into(), Value::from(tolerance));

    let mut rows = vec![vec![
        "left integral".to_string(),
        report.lhs.value.to_string(),
        "1".to_string(),
    ]];
    for factor in &report.rhs_factors {
        rows.push(vec![
            factor.name.clone(),
            factor.value.base().to_string(),
            factor.exponent.to_string(),
        ]);
    }
    rows.push(vec!["ratio".to_string(), report.ratio.to_string(), String::new()]);

    Ok(RunOutput {
        stem: sp.out_stem,
        payload,
        csv: csv_table("name,value,exponent", &rows),
        pass,
        summary: lines,
    })
}

// ---------------------------------------------------------------------------
// radon-probe
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadonProbeSpec {
    #[serde(default)]
    out_stem: Option<String>,
    phase: PhaseDto,
    region: RegionDto,
    /// Shell half-width ε of the indicator χ_{|ρ| ≤ ε}.
    eps: f64,
    /// Left density (only meaningful without `left_point`).
    #[serde(default)]
    f: Option<String>,
    /// Right density.
    #[serde(default)]
    g: Option<String>,
    /// When given, probes the operator at this single left point instead of
    /// averaging the bilinear form over the whole region.
    #[serde(default)]
    left_point: Option<Vec<f64>>,
    #[serde(default)]
    n_samples: Option<u64>,
    #[serde(default)]
    method: Option<String>,
    #[serde(default)]
    clip_ceiling: Option<f64>,
    /// Expected value of the probe (e.g. a closed form); with it the check
    /// requires agreement within `tolerance`.
    #[serde(default)]
    reference: Option<f64>,
    /// Relative tolerance against `reference` (default 0.05).
    #[serde(default)]
    tolerance: Option<f64>,
}

pub fn radon_probe(value: &Value, seed: u64) -> CliResult<RunOutput> {
    let sp: RadonProbeSpec = spec::payload(value)?;
    let ps = sp.phase.build()?;
    let region = sp.region.build()?;
    let opts = build_opts(seed, sp.n_samples, sp.method.as_deref(), sp.clip_ceiling)?;

    let g_poly = density(sp.g.as_deref(), ps.d_r)?;
    let g = density_fn(&g_poly);

    let (mode, probe, std_error) = match &sp.left_point {
        Some(x) => {
            if sp.f.is_some() {
                return Err(Fail::Spec(
                    "`f` does not apply to a left-point probe; the left point is fixed".into(),
                ));
            }
            let v = radon_apply(&ps, g, x, sp.eps, &region, &opts)?;
            ("left-point", v, None)
        }
        None => {
            let f_poly = density(sp.f.as_deref(), ps.d_l)?;
            let f = density_fn(&f_poly);
            let est = sublevel_eval(&ps, sp.eps, &region, f, g, &opts)?;
            // Normalize the sublevel mass to an ε-shell average.
            let scale = 1.0 / (2.0 * sp.eps);
            ("shell-average", est.value * scale, Some(est.std_error * scale))
        }
    };

    let tolerance = sp.tolerance.unwrap_or(0.05);
    let relative_gap = match sp.reference {
        None => None,
        Some(r) if r == 0.0 => return Err(Fail::Spec("reference must be nonzero".into())),
        Some(r) => Some((probe / r - 1.0).abs()),
    };
    let pass = relative_gap.map_or(true, |gap| gap <= tolerance);

    let mut lines = vec![match std_error {
        Some(se) => format!("radon probe ({mode}): value {probe:.6} ± {se:.2e}"),
        None => format!("radon probe ({mode}): value {probe:.6}"),
    }];
    if let Some(gap) = relative_gap {
        lines.push(format!(
            "reference {}: relative gap {:.4} (tolerance {tolerance}) — {}",
            sp.reference.unwrap(),
            gap,
            if pass { "within" } else { "exceeded" }
        ));
    }

    let mut payload = Map::new();
    payload.insert("mode".into(), Value::from(mode));
    payload.insert("eps".into(), Value::from(sp.eps));
    payload.insert("value".into(), Value::from(probe));
    payload.insert("std_error".into(), std_error.map_or(Value::Null, Value::from));
    payload.insert("reference".into(), sp.reference.map_or(Value::Null, Value::from));
    payload.insert(
        "relative_gap".into(),
        relative_gap.map_or(Value::Null, Value::from),
    );
    payload.insert("tolerance".into(), Value::from(tolerance));

    let mut rows = vec![vec!["value".to_string(), probe.to_string()]];
    if let Some(se) = std_error {
        rows.push(vec!["std_error".to_string(), se.to_string()]);
    }
    if let Some(r) = sp.reference {
        rows.push(vec!["reference".to_string(), r.to_string()]);
        rows.push(vec![
            "relative_gap".to_string(),
            relative_gap.unwrap().to_string(),
        ]);
    }

    Ok(RunOutput {
        stem: sp.out_stem,
        payload,
        csv: csv_table("quantity,value", &rows),
        pass,
        summary: lines,
    })
}

// ---------------------------------------------------------------------------
// exponents
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExponentsSpec {
    #[serde(default)]
    out_stem: Option<String>,
    /// Left block dimension.
    d_l: u32,
    /// Flattening order (required unless `dual_only`).
    #[serde(default)]
    k: Option<u32>,
    /// Curvature constraint count (required unless `dual_only`).
    #[serde(default)]
    m: Option<u32>,
    /// Geometric index as an exact rational string.
    s: String,
    /// Also emit the classical pair (d²/(d−1), d/(d−1)) for this dimension.
    #[serde(default)]
    gs_d: Option<u32>,
    /// Compute only the dual exponent p′, which needs none of the
    /// effective-dimension hypotheses.
    #[serde(default)]
    dual_only: bool,
}

pub fn exponents(value: &Value, _seed: u64) -> CliResult<RunOutput> {
    let sp: ExponentsSpec = spec::payload(value)?;
    let s = parse_rat(&sp.s)?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut payload = Map::new();

    let dual = verify::dual_exponent(sp.d_l, &s)?;
    let set = if sp.dual_only {
        None
    } else {
        let k = sp.k.ok_or_else(|| Fail::Spec("`k` is required unless dual_only".into()))?;
        let m = sp.m.ok_or_else(|| Fail::Spec("`m` is required unless dual_only".into()))?;
        Some(verify::exponents(sp.d_l, k, m, &s)?)
    };

    if let Some(set) = &set {
        rows.push(vec!["d_eff".into(), set.d_eff.to_string(), set.d_eff.to_string()]);
        for (name, value) in [
            ("s_bar", &set.s_bar),
            ("alpha", &set.alpha),
            ("p", &set.p),
            ("q", &set.q),
            ("p_prime", &set.p_prime),
        ] {
            rows.push(vec![name.into(), format_rat(value), rat_to_f64(value).to_string()]);
        }
    }
    rows.push(vec!["dual".into(), format_rat(&dual), rat_to_f64(&dual).to_string()]);

    let gs = match sp.gs_d {
        None => None,
        Some(d) => {
            let (gp, gq) = verify::gs_exponents(d)?;
            rows.push(vec!["gs_p".into(), format_rat(&gp), rat_to_f64(&gp).to_string()]);
            rows.push(vec!["gs_q".into(), format_rat(&gq), rat_to_f64(&gq).to_string()]);
            Some((gp, gq))
        }
    };

    let summary = match &set {
        Some(set) => format!(
            "exponents: d_eff {}, s_bar {}, alpha {}, p {}, q {}, p_prime {}",
            set.d_eff,
            format_rat(&set.s_bar),
            format_rat(&set.alpha),
            format_rat(&set.p),
            format_rat(&set.q),
            format_rat(&set.p_prime),
        ),
        None => format!("exponents: dual p_prime {}", format_rat(&dual)),
    };

    payload.insert("set".into(), set.as_ref().map_or(Ok(Value::Null), to_value)?);
    payload.insert("dual".into(), Value::from(format_rat(&dual)));
    payload.insert(
        "gs".into(),
        match &gs {
            None => Value::Null,
            Some((gp, gq)) => {
                let mut pair = Map::new();
                pair.insert("p".into(), Value::from(format_rat(gp)));
                pair.insert("q".into(), Value::from(format_rat(gq)));
                Value::Object(pair)
            }
        },
    );

    Ok(RunOutput {
        stem: sp.out_stem,
        payload,
        csv: csv_table("name,exact,float", &rows),
        pass: true,
        summary: vec![summary],
    })
}
