use std::fs;

use log::info;
use serde::Serialize;

use rfmagic::magic::{self, ClockState, Engine, FitWindow, Numerics, SolverSettings};
use rfmagic::robustness::{self, DeviationBudget, ProfileSettings, Steps};
use rfmagic::static_spectrum::find_static_magic_field;
use rfmagic::{AtomSpec, TrapConfig};

use crate::output::{csv_bytes, emit, json_bytes, num, timestamp, CliError, CliResult, Manifest};
use crate::{AtomArgs, Format, NumericArgs, OutArgs, ProfileArgs, RobustnessArgs, ScanArgs, StateArg};

pub fn load_atom(args: &AtomArgs) -> CliResult<AtomSpec> {
    let mut atom = match &args.atom_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read atom file {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("invalid atom file {}: {e}", path.display())))?
        }
        None => AtomSpec::rubidium87(),
    };
    if let Some(v) = args.g_i {
        atom.g_i = v;
    }
    if let Some(v) = args.g_j {
        atom.g_j = v;
    }
    if let Some(v) = args.hfs {
        atom.hfs_frequency = v;
    }
    atom.validate()?;
    Ok(atom)
}

fn manifest<'a, P: Serialize>(command: &'a str, atom: &'a AtomSpec, parameters: &'a P) -> Manifest<'a, P> {
    Manifest {
        command,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp(),
        atom,
        parameters,
    }
}

fn numerics(args: &NumericArgs) -> CliResult<Numerics> {
    if args.blocks < 3 || args.blocks.is_multiple_of(2) {
        return Err(CliError::Input(format!("--blocks must be odd and at least 3, got {}", args.blocks)));
    }
    let n = Numerics {
        engine: args.method.into(),
        n_blocks: args.blocks,
        window: FitWindow {
            chi_max: args.chi_max,
            nodes: args.nodes,
            degree: args.degree,
        },
        alpha: 0.0,
    };
    n.window.validate()?;
    Ok(n)
}

#[derive(Serialize)]
struct ResolvedParameters<'a, A: Serialize> {
    overrides: &'a AtomArgs,
    args: &'a A,
    #[serde(skip_serializing_if = "Option::is_none")]
    solver: Option<SolverSettings>,
}

#[derive(Serialize)]
struct StaticReport {
    b_magic_g: f64,
    curvature_hz_per_g2: f64,
    quadratic_coefficient_hz_per_g2: f64,
    shift_hz: f64,
}

pub fn static_magic(atom: &AtomSpec, overrides: &AtomArgs, args: &OutArgs) -> CliResult<()> {
    let m = find_static_magic_field(atom)?;
    let report = StaticReport {
        b_magic_g: m.b_magic,
        curvature_hz_per_g2: m.curvature,
        quadratic_coefficient_hz_per_g2: m.quadratic_coefficient(),
        shift_hz: m.shift,
    };
    let params = ResolvedParameters::<OutArgs> {
        overrides,
        args,
        solver: None,
    };
    emit(args.out.as_deref(), &json_bytes(&report)?, &manifest("static-magic", atom, &params))
}

const SCAN_HEADER: [&str; 12] = [
    "rf_frequency_mhz",
    "b_ioffe_magic_g",
    "b_rf_magic_g",
    "a0_hz",
    "a1_hz_per_g2",
    "a2_hz_per_g4",
    "a3_hz_per_g6",
    "fit_rms_residual_hz",
    "iterations",
    "method",
    "blocks",
    "status",
];

#[derive(Serialize)]
struct ScanRow {
    rf_frequency_mhz: f64,
    b_ioffe_magic_g: Option<f64>,
    b_rf_magic_g: Option<f64>,
    a0_hz: Option<f64>,
    a1_hz_per_g2: Option<f64>,
    a2_hz_per_g4: Option<f64>,
    a3_hz_per_g6: Option<f64>,
    fit_rms_residual_hz: Option<f64>,
    iterations: Option<usize>,
    status: String,
}

fn frequency_grid(start: f64, stop: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(start > 0.0) || !(step > 0.0) || !(stop >= start) || !stop.is_finite() {
        return Err(CliError::Input(format!(
            "empty frequency range: start {start} MHz, stop {stop} MHz, step {step} MHz"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e3).collect())
}

pub fn magic_scan(atom: &AtomSpec, overrides: &AtomArgs, args: &ScanArgs) -> CliResult<()> {
    let freqs = frequency_grid(args.freq_start, args.freq_stop, args.freq_step)?;
    let settings = SolverSettings {
        numerics: numerics(&args.numerics)?,
        ..SolverSettings::new(args.numerics.method.into())
    };
    info!("scanning {} frequencies with {}", freqs.len(), settings.numerics.engine);
    let entries = magic::magic_scan(atom, &freqs, &settings)?;

    let rows: Vec<ScanRow> = entries
        .iter()
        .map(|e| {
            let p = e.point.as_ref();
            let x = |f: fn(&magic::MagicPoint) -> f64| p.map(f);
            ScanRow {
                rf_frequency_mhz: e.rf_frequency / 1e6,
                b_ioffe_magic_g: x(|p| p.b_ioffe),
                b_rf_magic_g: x(|p| p.b_rf),
                a0_hz: x(|p| p.expansion.a0),
                a1_hz_per_g2: x(|p| p.expansion.a1),
                a2_hz_per_g4: x(|p| p.expansion.a2),
                a3_hz_per_g6: x(|p| p.expansion.a3),
                fit_rms_residual_hz: x(|p| p.expansion.fit_rms_residual),
                iterations: p.map(|p| p.iterations),
                status: match &e.error {
                    None => "ok".into(),
                    Some(m) => format!("failed: {m}"),
                },
            }
        })
        .collect();

    let format = args.format.unwrap_or(match &args.out.out {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => Format::Json,
        _ => Format::Csv,
    });
    let method = settings.numerics.engine.to_string();
    let data = match format {
        Format::Json => json_bytes(&serde_json::json!({
            "method": method,
            "blocks": settings.numerics.n_blocks,
            "rows": rows,
        }))?,
        Format::Csv => {
            let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        num(r.rf_frequency_mhz),
                        opt(r.b_ioffe_magic_g),
                        opt(r.b_rf_magic_g),
                        opt(r.a0_hz),
                        opt(r.a1_hz_per_g2),
                        opt(r.a2_hz_per_g4),
                        opt(r.a3_hz_per_g6),
                        opt(r.fit_rms_residual_hz),
                        r.iterations.map(|i| i.to_string()).unwrap_or_default(),
                        method.clone(),
                        settings.numerics.n_blocks.to_string(),
                        r.status.clone(),
                    ]
                })
                .collect();
            csv_bytes(&SCAN_HEADER, &table)?
        }
    };
    let params = ResolvedParameters {
        overrides,
        args,
        solver: Some(settings),
    };
    emit(args.out.out.as_deref(), &data, &manifest("magic-scan", atom, &params))?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed == rows.len() {
        return Err(CliError::Numerical("no magic point found at any frequency".into()));
    }
    if failed > 0 {
        log::warn!("{failed} of {} frequencies failed", rows.len());
    }
    Ok(())
}

const PROFILE_HEADER: [&str; 7] = [
    "u_trap_hz",
    "chi_g2",
    "radius_um",
    "relative_shift_hz",
    "rms_deviation_hz",
    "total_inhomogeneity_hz",
    "status",
];

#[derive(Serialize)]
struct ProfileTrap {
    trap: TrapConfig,
    magic_solved: bool,
}

pub fn profile(atom: &AtomSpec, overrides: &AtomArgs, args: &ProfileArgs) -> CliResult<()> {
    let n = numerics(&args.numerics)?;
    let engine: Engine = n.engine;
    let freq = args.freq * 1e6;
    let mut trap = if args.magic {
        let settings = SolverSettings {
            numerics: n,
            ..SolverSettings::new(engine)
        };
        magic::solve_magic_point(atom, freq, None, &settings)?.trap()
    } else {
        let b_ioffe = match args.b_ioffe {
            Some(b) => b,
            None => find_static_magic_field(atom)?.b_magic,
        };
        TrapConfig {
            b_ioffe,
            gradient: args.gradient,
            rf_amplitude: args.b_rf,
            rf_frequency: freq,
            polarization_delta: args.delta,
        }
    };
    trap.gradient = args.gradient;
    if args.magic {
        trap.polarization_delta = args.delta;
    }
    trap.validate()?;
    trap.validity_warnings(atom);

    let budget = args.budget.map(|[i, r, e]| DeviationBudget {
        rel_ioffe: i,
        rel_rf: r,
        polarization_offset: e.to_radians(),
    });
    let settings = ProfileSettings {
        engine,
        n_blocks: n.n_blocks,
        alpha: args.alpha,
        state: match args.state {
            StateArg::Lower => ClockState::Lower,
            StateArg::Upper => ClockState::Upper,
        },
        steps: Steps::default(),
    };
    let prof = robustness::shift_profile(atom, &trap, budget.as_ref(), args.u_max, args.points, &settings)?;

    let mut table: Vec<Vec<String>> = prof
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.u_trap),
                num(r.chi),
                num(trap.radius_at_chi(r.chi) * 1e4),
                num(r.relative_shift),
                num(r.rms_deviation),
                num(r.total_inhomogeneity()),
                "ok".into(),
            ]
        })
        .collect();
    if let Some(msg) = &prof.truncated {
        let mut marker = vec![String::new(); PROFILE_HEADER.len() - 1];
        marker.push(format!("truncated: {msg}"));
        table.push(marker);
    }
    let resolved = ProfileTrap {
        trap,
        magic_solved: args.magic,
    };
    let params = serde_json::json!({
        "overrides": overrides,
        "args": args,
        "resolved": resolved,
        "profile": settings,
    });
    emit(
        args.out.out.as_deref(),
        &csv_bytes(&PROFILE_HEADER, &table)?,
        &manifest("profile", atom, &params),
    )
}

pub fn robustness(atom: &AtomSpec, overrides: &AtomArgs, args: &RobustnessArgs) -> CliResult<()> {
    let n = numerics(&args.numerics)?;
    if !(args.field_step > 0.0) || !(args.pol_step_deg > 0.0) {
        return Err(CliError::Input("finite-difference steps must be positive".into()));
    }
    let mut freqs: Vec<f64> = args.freq.iter().map(|f| (f * 1e9).round() / 1e3).collect();
    if freqs.iter().any(|f| !(*f > 0.0)) {
        return Err(CliError::Input("frequencies must be positive".into()));
    }
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    let settings = SolverSettings {
        numerics: n,
        ..SolverSettings::new(n.engine)
    };
    let steps = Steps {
        field: args.field_step,
        polarization: args.pol_step_deg.to_radians(),
    };
    let mut reports = Vec::new();
    for entry in magic::magic_scan(atom, &freqs, &settings)? {
        let point = entry.point.ok_or_else(|| {
            CliError::Numerical(format!(
                "no magic point at {} MHz: {}",
                entry.rf_frequency / 1e6,
                entry.error.unwrap_or_default()
            ))
        })?;
        reports.push(robustness::sensitivity_report(atom, &point, &n, &steps)?);
    }
    let data = json_bytes(&serde_json::json!({
        "units": {
            "rf_frequency": "Hz",
            "b_ioffe": "G",
            "b_rf": "G",
            "base": ["Hz", "Hz/G^2", "Hz/G^4", "Hz/G^6"],
            "alpha_ioffe": ["Hz", "Hz/G^2", "Hz/G^4"],
            "alpha_rf": ["Hz", "Hz/G^2", "Hz/G^4"],
            "beta": ["Hz/G^2/rad", "Hz/G^4/rad"],
            "gamma": ["Hz/rad^2", "Hz/G^2/rad^2", "Hz/G^4/rad^2"],
            "beta0_check": "Hz/rad",
            "steps.polarization": "rad"
        },
        "reports": reports,
    }))?;
    let params = ResolvedParameters {
        overrides,
        args,
        solver: Some(settings),
    };
    emit(args.out.out.as_deref(), &data, &manifest("robustness", atom, &params))
}
