use std::path::Path;

use freespace::artifact::{self, Cell, Format, Provenance, RawTable, Table};
use freespace::config::RunConfig;
use freespace::constants::{mhz_to_rad, rad_to_mhz};
use freespace::fitting::{self, FitError, FitProblem, ModelKind, TransmissionModel};
use freespace::optics::{mode_overlap_ideal, resonant_extinction};
use freespace::photon::{self, CountRecord, CountRun, TimeResolved, TransmissionSource};
use freespace::spectra::{ideal_saturation_power, reflection_at, transmission_minimum};
use freespace::thermal::{self, SampledSpectrum};
use freespace::Error;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const PW: f64 = 1e-12;

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

pub fn load_run_config(path: Option<&Path>, seed: Option<u64>, samples: Option<usize>) -> Result<RunConfig, CliError> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = samples {
        cfg.samples = n;
    }
    Ok(cfg)
}

fn run_provenance(command: &str, table: &str, format: Format, cfg: &RunConfig) -> Provenance {
    let mut p = Provenance::new(command, table, format);
    p.seed = Some(cfg.seed);
    p.samples = Some(cfg.samples);
    p.config = Some(cfg.clone());
    p
}

pub fn write_all(dir: &Path, tables: &[Table]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    for t in tables {
        let path = t.write_to_dir(dir)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn overlap(cfg: &RunConfig, lambda: Option<f64>, format: Format) -> Result<Vec<Table>, CliError> {
    let r = cfg.resolve()?;
    let u = r.optics.focusing_strength();
    let (value, source) = match lambda {
        Some(l) => (l, "input"),
        None => (mode_overlap_ideal(u)?, "ideal"),
    };
    let eps = resonant_extinction(value)?;
    let mut p = Provenance::new("overlap", "overlap", format);
    p.config = Some(cfg.clone());
    p.inputs = lambda.map(|l| serde_json::json!({ "lambda": l }));
    let mut t = Table::new(
        p,
        &[
            "focusing_strength",
            "numerical_aperture",
            "overlap",
            "overlap_source",
            "extinction",
            "ideal_saturation_power_pw",
            "focal_waist_um",
            "focal_rayleigh_range_um",
        ],
    );
    t.push(vec![
        u.into(),
        r.optics.numerical_aperture.into(),
        value.into(),
        source.into(),
        eps.into(),
        (ideal_saturation_power(&r.species) / PW).into(),
        (r.probe_focus.waist * 1e6).into(),
        (r.probe_focus.rayleigh_range * 1e6).into(),
    ]);
    Ok(vec![t])
}

pub fn print_overlap(t: &Table) {
    for (name, cell) in t.columns.iter().zip(&t.rows[0]) {
        println!("{name} = {cell}");
    }
}

/// Pulse-averaged truth and the source used to generate counts.
enum Truth {
    Stationary(SampledSpectrum),
    Heated(Vec<Vec<f64>>),
}

pub fn simulate(cfg: &RunConfig, format: Format) -> Result<Vec<Table>, CliError> {
    let r = cfg.resolve()?;
    let model = r.thermal_model();
    let dets = &r.pulse.detunings;
    let n_bins = r.pulse.n_bins();
    let truth = if r.heating {
        let per_bin = r.pulse.mean_incident_photons / n_bins as f64;
        Truth::Heated(thermal::heated_pulse_transmission(&r.thermal, &model, dets, n_bins, per_bin, r.samples, r.seed)?)
    } else {
        Truth::Stationary(thermal::thermal_average_transmission(&r.thermal, &model, dets, r.samples, r.seed)?)
    };
    let run = match &truth {
        Truth::Stationary(s) => photon::generate_run(s, r.backscatter.as_ref(), &r.pulse, &r.detector, r.seed)?,
        Truth::Heated(table) => {
            let source = TimeResolved(|k: usize, _d: f64, b: usize, _n: usize| table[k][b]);
            let source: &dyn TransmissionSource = &source;
            photon::generate_run(source, r.backscatter.as_ref(), &r.pulse, &r.detector, r.seed)?
        }
    };
    let (true_tau, true_se): (Vec<f64>, Vec<f64>) = match &truth {
        Truth::Stationary(s) => (s.mean_transmission.clone(), s.mc_standard_error.clone()),
        Truth::Heated(table) => (
            table.iter().map(|row| row.iter().sum::<f64>() / row.len() as f64).collect(),
            vec![f64::NAN; dets.len()],
        ),
    };

    let mut tables = Vec::new();

    let mut counts = Table::new(
        run_provenance("simulate", "counts", format, cfg),
        &["detuning_mhz", "bin", "t_start_ms", "probe_f", "reference_f", "probe_b", "true_scattered"],
    );
    for rec in &run.records {
        for b in 0..rec.probe_f.len() {
            counts.push(vec![
                rad_to_mhz(rec.detuning).into(),
                b.into(),
                (b as f64 * run.bin_width * 1e3).into(),
                rec.probe_f[b].into(),
                rec.reference_f[b].into(),
                rec.probe_b[b].into(),
                rec.true_scattered[b].into(),
            ]);
        }
    }
    tables.push(counts);

    let mut tx = Table::new(
        run_provenance("simulate", "transmission", format, cfg),
        &["detuning_mhz", "transmission", "sigma", "true_transmission", "true_std_error"],
    );
    let (rows, _) = photon::transmission_rows(&run, &r.detector);
    for row in &rows {
        let k = dets.iter().position(|d| *d == row.x).expect("row detuning is on the grid");
        tx.push(vec![
            rad_to_mhz(row.x).into(),
            row.y.into(),
            row.sigma.into(),
            true_tau[k].into(),
            true_se[k].into(),
        ]);
    }
    tables.push(tx);

    let mut refl = Table::new(
        run_provenance("simulate", "reflection", format, cfg),
        &["detuning_mhz", "backscatter_probability", "sigma", "true_probability"],
    );
    let (rows, _) = photon::reflection_rows(&run, &r.detector);
    for row in &rows {
        let truth = r.backscatter.map_or(0.0, |b| {
            r.detector.eta_b * reflection_at(b.resonant_probability, b.linewidth, b.shift, row.x)
        });
        refl.push(vec![rad_to_mhz(row.x).into(), row.y.into(), row.sigma.into(), truth.into()]);
    }
    tables.push(refl);

    if n_bins > 1 {
        let mut binned = Table::new(
            run_provenance("simulate", "binned", format, cfg),
            &[
                "group",
                "photons_low",
                "photons_high",
                "detuning_mhz",
                "transmission",
                "std_error",
                "time_bins",
                "insufficient",
            ],
        );
        for g in photon::rebin_by_scattered(&run, &r.detector, 30.0)? {
            for row in &g.rows {
                binned.push(vec![
                    g.group.into(),
                    g.photons_low.into(),
                    g.photons_high.into(),
                    rad_to_mhz(row.detuning).into(),
                    row.transmission.into(),
                    row.std_error.into(),
                    row.time_bins.into(),
                    row.insufficient.into(),
                ]);
            }
        }
        tables.push(binned);
    }
    Ok(tables)
}

pub fn heating_sweep(cfg: &RunConfig, format: Format) -> Result<Vec<Table>, CliError> {
    let r = cfg.resolve()?;
    let model = r.thermal_model();
    let points = thermal::heating_sweep(&r.thermal, &model, &r.schedule, &r.pulse.detunings, r.samples, r.seed)?;
    let mut t = Table::new(
        run_provenance("heating-sweep", "sweep", format, cfg),
        &[
            "photons",
            "temperature_x_uk",
            "temperature_y_uk",
            "temperature_z_uk",
            "linewidth_mhz",
            "shift_mhz",
            "overlap",
            "phase_rad",
            "extinction",
            "reduced_chi_squared",
            "error",
        ],
    );
    for p in &points {
        let mut row: Vec<Cell> = vec![p.photons.into()];
        row.extend(p.temperatures.iter().map(|t| Cell::from(t * 1e6)));
        match &p.fit {
            Some(f) => row.extend([
                rad_to_mhz(f.linewidth).into(),
                rad_to_mhz(f.shift).into(),
                f.overlap.into(),
                f.phase.into(),
                f.extinction.into(),
                f.reduced_chi_squared.into(),
            ]),
            None => row.extend(std::iter::repeat_n(Cell::from(f64::NAN), 6)),
        }
        row.push(p.error.clone().unwrap_or_default().into());
        t.push(row);
    }
    Ok(vec![t])
}

/// Everything a fit depends on, in CLI units (MHz, pW, counts/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInput {
    pub model: ModelKind,
    pub natural_linewidth_mhz: f64,
    /// (x, y, sigma)
    pub rows: Vec<[f64; 3]>,
    pub excluded_rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_table: Option<String>,
}

fn count_run_from_table(raw: &RawTable) -> Result<(CountRun, freespace::photon::DetectorConfig), CliError> {
    let cfg = raw
        .provenance
        .as_ref()
        .and_then(|p| p.config.clone())
        .ok_or_else(|| Error::Parse { line: 1, message: "count table has no embedded configuration".into() })?;
    let r = cfg.resolve()?;
    let col = |name: &str| {
        raw.column(name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("count table lacks column '{name}'") })
    };
    let idx = [
        col("detuning_mhz")?,
        col("probe_f")?,
        col("reference_f")?,
        col("probe_b")?,
        col("true_scattered")?,
    ];
    let values = raw.numeric(&idx)?;
    let mut records: Vec<CountRecord> = Vec::new();
    for (v, (line, _)) in values.iter().zip(&raw.rows) {
        for (name, c) in [("probe_f", v[1]), ("reference_f", v[2]), ("probe_b", v[3])] {
            if c < 0.0 || c.fract() != 0.0 {
                return Err(Error::Parse { line: *line, message: format!("{name} = {c} is not a count") }.into());
            }
        }
        let detuning = mhz_to_rad(v[0]);
        if records.last().is_none_or(|r| r.detuning != detuning) {
            records.push(CountRecord {
                detuning,
                probe_f: Vec::new(),
                reference_f: Vec::new(),
                probe_b: Vec::new(),
                true_scattered: Vec::new(),
            });
        }
        let rec = records.last_mut().expect("just pushed");
        rec.probe_f.push(v[1] as u64);
        rec.reference_f.push(v[2] as u64);
        rec.probe_b.push(v[3] as u64);
        rec.true_scattered.push(v[4]);
    }
    let run = CountRun {
        seed: r.seed,
        bin_width: r.pulse.duration / r.pulse.n_bins() as f64,
        repetitions: r.pulse.repetitions,
        mean_incident_photons: r.pulse.mean_incident_photons,
        records,
    };
    Ok((run, r.detector))
}

pub fn fit_input_from_file(path: &Path, model: ModelKind) -> Result<FitInput, CliError> {
    let raw = artifact::read_table(path)?;
    let natural_linewidth_mhz = raw
        .provenance
        .as_ref()
        .and_then(|p| p.config.as_ref())
        .map_or(freespace::constants::RB87_D2_LINEWIDTH_HZ * 1e-6, |c| c.species.linewidth_mhz);
    let (rows, excluded_rows) = if raw.column("probe_f").is_some() && raw.column("reference_f").is_some() {
        let (run, det) = count_run_from_table(&raw)?;
        let (rows, excluded) = match model {
            ModelKind::Transmission => photon::transmission_rows(&run, &det),
            ModelKind::Reflection => photon::reflection_rows(&run, &det),
            ModelKind::Saturation => {
                return Err(Error::Parse { line: 1, message: "a count table cannot be fitted with the saturation model".into() }.into())
            }
        };
        (rows.iter().map(|r| [rad_to_mhz(r.x), r.y, r.sigma]).collect(), excluded)
    } else {
        if raw.columns.len() < 3 {
            return Err(Error::Parse { line: 1, message: "expected at least three columns: x, y, sigma".into() }.into());
        }
        let values = raw.numeric(&[0, 1, 2])?;
        for (v, (line, _)) in values.iter().zip(&raw.rows) {
            if !(v[2] > 0.0) {
                return Err(Error::Parse { line: *line, message: format!("sigma = {} must be positive", v[2]) }.into());
            }
        }
        (values.into_iter().map(|v| [v[0], v[1], v[2]]).collect(), 0)
    };
    Ok(FitInput {
        model,
        natural_linewidth_mhz,
        rows,
        excluded_rows,
        source_seed: raw.provenance.as_ref().and_then(|p| p.seed),
        source_table: raw.provenance.as_ref().map(|p| p.table.clone()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub unit: String,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub provenance: Provenance,
    pub model: ModelKind,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub iterations: usize,
    pub n_points: usize,
    pub excluded_rows: usize,
    pub dof: usize,
    pub chi_squared: f64,
    pub reduced_chi_squared: f64,
    pub parameters: Vec<ParameterEntry>,
    /// In the units of `parameters`.
    pub covariance: Vec<Vec<f64>>,
    pub covariance_psd: bool,
    pub uncertainties_flagged: bool,
    /// 1 − min τ of the fitted transmission curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extinction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dip_detuning_mhz: Option<f64>,
}

impl FitReport {
    pub fn into_result(self) -> Result<(), CliError> {
        match self.error {
            Some(e) => Err(CliError::FitFailed(e)),
            None => Ok(()),
        }
    }
}

/// Scale from internal SI/rad-s units to report units, per parameter.
fn report_units(model: ModelKind) -> Vec<(&'static str, f64)> {
    let mhz = rad_to_mhz(1.0);
    match model {
        ModelKind::Transmission => vec![("MHz", mhz), ("MHz", mhz), ("1", 1.0), ("rad", 1.0)],
        ModelKind::Reflection => vec![("1", 1.0), ("MHz", mhz), ("MHz", mhz)],
        ModelKind::Saturation => vec![("pW", 1.0 / PW), ("1", 1.0)],
    }
}

pub fn fit(input: &FitInput) -> Result<FitReport, CliError> {
    let x_scale = match input.model {
        ModelKind::Saturation => PW,
        _ => mhz_to_rad(1.0),
    };
    let rows = input
        .rows
        .iter()
        .map(|r| fitting::DataRow { x: r[0] * x_scale, y: r[1], sigma: r[2] })
        .collect();
    let mut problem = FitProblem::for_kind(input.model, rows, mhz_to_rad(input.natural_linewidth_mhz))?;
    problem.excluded_rows = input.excluded_rows;
    let (result, error) = match fitting::fit(&problem) {
        Ok(res) => (res, None),
        Err(FitError::NotConverged { best }) => {
            let msg = format!("no convergence after {} iterations", best.iterations);
            (*best, Some(msg))
        }
        Err(e) => return Err(e.into()),
    };
    let errors = fitting::parameter_uncertainties(&result);
    let units = report_units(input.model);
    let parameters = result
        .param_names
        .iter()
        .enumerate()
        .map(|(i, name)| ParameterEntry {
            name: name.clone(),
            unit: units[i].0.into(),
            value: result.params[i] * units[i].1,
            std_error: errors.std_errors[i] * units[i].1,
        })
        .collect();
    let covariance = result
        .covariance
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, c)| c * units[i].1 * units[j].1).collect())
        .collect();
    let (extinction, dip_detuning_mhz) = if input.model == ModelKind::Transmission {
        let (d, tau) = transmission_minimum(&TransmissionModel::params(&result.params));
        (Some(1.0 - tau), Some(rad_to_mhz(d)))
    } else {
        (None, None)
    };
    let mut prov = Provenance::new("fit", "fit_report", Format::Json);
    prov.seed = input.source_seed;
    prov.inputs = Some(serde_json::to_value(input).map_err(Error::from)?);
    Ok(FitReport {
        provenance: prov,
        model: input.model,
        converged: result.converged,
        error,
        iterations: result.iterations,
        n_points: result.n_points,
        excluded_rows: input.excluded_rows,
        dof: result.n_points - result.params.len(),
        chi_squared: result.chi_squared,
        reduced_chi_squared: result.reduced_chi_squared,
        parameters,
        covariance,
        covariance_psd: result.covariance_psd,
        uncertainties_flagged: errors.flagged,
        extinction,
        dip_detuning_mhz,
    })
}

pub fn write_report(dir: &Path, report: &FitReport) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    let path = dir.join("fit_report.json");
    let mut bytes = serde_json::to_vec_pretty(report).map_err(Error::from)?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(Error::from)?;
    println!("wrote {}", path.display());
    for p in &report.parameters {
        println!("{} = {} ± {} {}", p.name, p.value, p.std_error, p.unit);
    }
    println!("reduced chi-squared = {}", report.reduced_chi_squared);
    Ok(())
}

pub fn replay(path: &Path, out: &Path) -> Result<(), CliError> {
    let prov = artifact::read_provenance(path)?;
    let missing = |what: &str| Error::Parse { line: 1, message: format!("artifact provenance has no {what}") };
    match prov.command.as_str() {
        "overlap" => {
            let cfg = prov.config.ok_or_else(|| missing("config"))?;
            let lambda = prov.inputs.as_ref().and_then(|v| v.get("lambda")).and_then(|v| v.as_f64());
            write_all(out, &overlap(&cfg, lambda, prov.format)?)
        }
        "simulate" => {
            let cfg = prov.config.ok_or_else(|| missing("config"))?;
            write_all(out, &simulate(&cfg, prov.format)?)
        }
        "heating-sweep" => {
            let cfg = prov.config.ok_or_else(|| missing("config"))?;
            write_all(out, &heating_sweep(&cfg, prov.format)?)
        }
        "fit" => {
            let inputs = prov.inputs.ok_or_else(|| missing("fit inputs"))?;
            let input: FitInput = serde_json::from_value(inputs).map_err(Error::from)?;
            let report = fit(&input)?;
            write_report(out, &report)?;
            report.into_result()
        }
        other => Err(Error::Parse { line: 1, message: format!("unknown command '{other}' in provenance") }.into()),
    }
}
