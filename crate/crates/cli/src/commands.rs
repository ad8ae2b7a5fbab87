//! Subcommand implementations. Every random draw is keyed by (seed, lane, frame),
//! so outputs do not depend on the thread count.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use qpi_core::config::CheckedConfig;
use qpi_core::metrics::{noise_suppression_scan, quantum_advantage, resolution_scan, StackFrames};
use qpi_core::report::{fmt_num, write_pgm, Cell, Csv};
use qpi_core::retrieval::{estimate_transmittance, quantum_correct};
use qpi_core::twinbeam::{
    bin_counts, fit_efficiencies, idler_fano, measure_nrf, nrf_predicted, register_idler,
};
use qpi_core::{
    qpf, tie_retrieve, Grid, KMode, ObjectSpec, QpiError, RetrievalConfig, RngStream,
    ScalarField2D, TwinBeamFrame, TwinBeamSampler,
};

use crate::manifest::{OutputDir, MANIFEST};
use crate::settings::Settings;

type Result<T> = std::result::Result<T, QpiError>;

/// Random-stream lanes.
pub mod lanes {
    pub const CALIB: u16 = 1;
    pub const FOCUS: u16 = 2;
    pub const NRF: u16 = 3;
    /// −dz of defocus index j uses `DEFOCUS + 2j`, +dz uses `DEFOCUS + 2j + 1`.
    pub const DEFOCUS: u16 = 16;
    /// Pooled references: `REFERENCE + 3j + plane`.
    pub const REFERENCE: u16 = 0x300;
}

pub fn object_grid(s: &Settings) -> Result<Grid> {
    Grid::square(s.grid, s.optical.object_pixel_um())
}

pub fn target_object(s: &Settings) -> Result<ObjectSpec> {
    qpi_core::target::generate_test_target(object_grid(s)?, s.phase_pi, s.phase_null, s.tau_null)
}

pub fn dz_dir_name(dz: f64) -> String {
    format!("dz_{dz}")
}

fn frame_name(prefix: &str, f: usize) -> String {
    format!("{prefix}_{f:04}.qpf")
}

/// Samplers at −dz, 0 and +dz.
pub struct PlaneSamplers {
    pub minus: TwinBeamSampler,
    pub zero: TwinBeamSampler,
    pub plus: TwinBeamSampler,
}

impl PlaneSamplers {
    pub fn new(obj: &ObjectSpec, cfg: &CheckedConfig, dz: f64) -> Result<Self> {
        let g = obj.grid();
        Ok(Self {
            minus: TwinBeamSampler::new(Some(obj), g, cfg, -dz)?,
            zero: TwinBeamSampler::new(Some(obj), g, cfg, 0.0)?,
            plus: TwinBeamSampler::new(Some(obj), g, cfg, dz)?,
        })
    }

    /// Stack `f` for defocus index `j`; the in-focus exposure is shared across defocus values.
    pub fn stack(&self, seed: u64, j: usize, f: usize) -> StackFrames {
        let lane = lanes::DEFOCUS + 2 * j as u16;
        StackFrames {
            minus: self.minus.sample(RngStream::lane(seed, lane, f as u64)),
            zero: self
                .zero
                .sample(RngStream::lane(seed, lanes::FOCUS, f as u64)),
            plus: self.plus.sample(RngStream::lane(seed, lane + 1, f as u64)),
        }
    }

    /// Classical phase from `n` pooled frames per plane.
    pub fn reference(
        &self,
        n: u64,
        seed: u64,
        j: usize,
        rc: &RetrievalConfig,
    ) -> Result<qpi_core::PhaseImage> {
        let lane = |p: u16| RngStream::lane(seed, lanes::REFERENCE + 3 * j as u16 + p, 0);
        let rc = RetrievalConfig {
            k: 0.0,
            k_mode: KMode::Classical,
            ..rc.clone()
        };
        tie_retrieve(
            &self.zero.pooled_signal(n, lane(1)),
            &self.plus.pooled_signal(n, lane(2)),
            &self.minus.pooled_signal(n, lane(0)),
            &rc,
        )
    }
}

pub fn run_target(s: &Settings, out: &Path) -> Result<()> {
    s.check()?;
    let obj = target_object(s)?;
    let mut dir = OutputDir::create(out)?;
    dir.write_field("tau.qpf", obj.tau())?;
    dir.write_field("phi.qpf", obj.phi())?;
    write_pgm(out.join("tau.pgm"), obj.tau())?;
    write_pgm(out.join("phi.pgm"), obj.phi())?;
    dir.finish(&s.echo())?;
    println!("target {}x{} written to {}", s.grid, s.grid, out.display());
    Ok(())
}

/// Writes the frames of `count` exposures produced by `make` into `dir` in parallel.
fn write_frames<F>(dir: &mut OutputDir, count: usize, make: F) -> Result<()>
where
    F: Fn(usize) -> Vec<(String, ScalarField2D)> + Sync,
{
    let path = dir.path().to_path_buf();
    let written: Vec<Vec<(String, Vec<u8>)>> = (0..count)
        .into_par_iter()
        .map(|f| -> Result<Vec<(String, Vec<u8>)>> {
            make(f)
                .into_iter()
                .map(|(name, field)| {
                    let bytes = qpf::encode(&field);
                    std::fs::write(path.join(&name), &bytes)?;
                    Ok((name, bytes))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    for (name, bytes) in written.iter().flatten() {
        dir.record(name, bytes);
    }
    Ok(())
}

pub struct SimulateCounts {
    pub calib: usize,
    pub focus: usize,
}

pub fn run_simulate(s: &Settings, counts: SimulateCounts, out: &Path) -> Result<()> {
    let cfg = s.check()?;
    let obj = target_object(s)?;
    let g = obj.grid();
    let header = s.echo();
    let mut root = OutputDir::create(out)?;

    let calib = TwinBeamSampler::new(None, g, &cfg, 0.0)?;
    let mut d = OutputDir::create(out.join("calib"))?;
    write_frames(&mut d, counts.calib, |f| {
        let fr = calib.sample(RngStream::lane(s.seed, lanes::CALIB, f as u64));
        vec![(frame_name("s", f), fr.n_s), (frame_name("i", f), fr.n_i)]
    })?;
    let sum = d.finish(&header)?;
    root.record_hash(&format!("calib/{MANIFEST}"), sum);

    let zero = TwinBeamSampler::new(Some(&obj), g, &cfg, 0.0)?;
    let mut d = OutputDir::create(out.join("focus"))?;
    write_frames(&mut d, counts.focus, |f| {
        let fr = zero.sample(RngStream::lane(s.seed, lanes::FOCUS, f as u64));
        vec![(frame_name("s", f), fr.n_s), (frame_name("i", f), fr.n_i)]
    })?;
    let sum = d.finish(&header)?;
    root.record_hash(&format!("focus/{MANIFEST}"), sum);

    for (j, &dz) in s.dz_mm.iter().enumerate() {
        let minus = TwinBeamSampler::new(Some(&obj), g, &cfg, -dz)?;
        let plus = TwinBeamSampler::new(Some(&obj), g, &cfg, dz)?;
        let name = dz_dir_name(dz);
        let mut d = OutputDir::create(out.join(&name))?;
        let lane = lanes::DEFOCUS + 2 * j as u16;
        write_frames(&mut d, s.frames, |f| {
            let m = minus.sample(RngStream::lane(s.seed, lane, f as u64));
            let p = plus.sample(RngStream::lane(s.seed, lane + 1, f as u64));
            vec![
                (frame_name("m_s", f), m.n_s),
                (frame_name("m_i", f), m.n_i),
                (frame_name("p_s", f), p.n_s),
                (frame_name("p_i", f), p.n_i),
            ]
        })?;
        let sum = d.finish(&header)?;
        root.record_hash(&format!("{name}/{MANIFEST}"), sum);
    }
    // Root manifest: configuration plus the checksum of every sub-manifest.
    root.finish(&header)?;
    println!(
        "simulated {} calib, {} focus and {}x{} defocus frames into {}",
        counts.calib,
        counts.focus,
        s.dz_mm.len(),
        s.frames,
        out.display()
    );
    Ok(())
}

fn read_series(dir: &Path, prefix: &str) -> Result<Vec<ScalarField2D>> {
    let mut out = Vec::new();
    loop {
        let p = dir.join(frame_name(prefix, out.len()));
        if !p.exists() {
            break;
        }
        out.push(qpf::read(&p)?);
    }
    if out.is_empty() {
        return Err(QpiError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no {prefix}_*.qpf frames in {}", dir.display()),
        )));
    }
    Ok(out)
}

fn mean_of(fields: &[ScalarField2D]) -> Result<ScalarField2D> {
    let mut acc = fields[0].clone();
    for f in &fields[1..] {
        acc = acc.add(f)?;
    }
    Ok(acc.scale(1.0 / fields.len() as f64))
}

fn sum_of(fields: &[ScalarField2D]) -> Result<ScalarField2D> {
    let mut acc = fields[0].clone();
    for f in &fields[1..] {
        acc = acc.add(f)?;
    }
    Ok(acc)
}

/// Phase and transmittance from a `simulate` output directory.
pub fn run_retrieve(s: &Settings, input: &Path, out: &Path) -> Result<()> {
    let cfg = s.check()?;
    let bins = s.bins.clone().unwrap_or_else(|| vec![1]);
    let calib_s = read_series(&input.join("calib"), "s")?;
    let calib_i: Vec<ScalarField2D> = read_series(&input.join("calib"), "i")?
        .iter()
        .map(register_idler)
        .collect();
    let focus_s = read_series(&input.join("focus"), "s")?;
    let focus_i: Vec<ScalarField2D> = read_series(&input.join("focus"), "i")?
        .iter()
        .map(register_idler)
        .collect();
    let ref_mean = mean_of(&calib_s)?;
    let idler_mean = mean_of(&calib_i)?;
    let mut root = OutputDir::create(out)?;
    let mut summary = Csv::new(&[
        "quantity",
        "dz",
        "D",
        "k_mode",
        "k",
        "frames",
        "mean_pearson_to_average",
    ]);

    for &b in &bins {
        let mode = s.k_mode.unwrap_or(KMode::TauOpt);
        let mut rc = RetrievalConfig::new(&cfg, 1.0, mode, b)?;
        rc.reference_mean = Some(bin_counts(&ref_mean, b)?);
        rc.idler_mean = Some(bin_counts(&idler_mean, b)?);
        let taus: Vec<ScalarField2D> = focus_s
            .par_iter()
            .zip(&focus_i)
            .map(|(ns, ni)| estimate_transmittance(ns, ni, &rc).map(|t| t.tau))
            .collect::<Result<_>>()?;
        let avg = mean_of(&taus)?;
        let name = format!("tau_bin_{b}");
        let mut d = OutputDir::create(out.join(&name))?;
        for (f, t) in taus.iter().enumerate() {
            d.write_field(&frame_name("tau", f), t)?;
        }
        d.write_field("tau_avg.qpf", &avg)?;
        write_pgm(out.join(&name).join("tau_avg.pgm"), &avg)?;
        root.record_hash(&format!("{name}/{MANIFEST}"), d.finish(&s.echo())?);
        summary.push(&[
            Cell::Text("tau"),
            Cell::Num(0.0),
            Cell::Num(cfg.d_factor(b)),
            Cell::Text(&mode.label()),
            Cell::Num(rc.k),
            Cell::Int(taus.len() as i64),
            Cell::Num(mean_pearson(&taus, &avg)),
        ]);
    }

    for &dz in &s.dz_mm {
        let dir = input.join(dz_dir_name(dz));
        let ms = read_series(&dir, "m_s")?;
        let mi = read_series(&dir, "m_i")?;
        let ps = read_series(&dir, "p_s")?;
        let pi = read_series(&dir, "p_i")?;
        let n = ms.len().min(ps.len()).min(focus_s.len());
        for &b in &bins {
            let mode = s.k_mode.unwrap_or(KMode::TieOpt);
            let rc = RetrievalConfig::new(&cfg, dz, mode, b)?;
            let corr = |ns: &ScalarField2D, ni: &ScalarField2D, raw: bool| {
                let reg = if raw { register_idler(ni) } else { ni.clone() };
                quantum_correct(ns, &reg, Some(&idler_mean), rc.k)
            };
            let corrected: Vec<[ScalarField2D; 3]> = (0..n)
                .into_par_iter()
                .map(|f| {
                    Ok([
                        corr(&ms[f], &mi[f], true)?,
                        corr(&focus_s[f], &focus_i[f], false)?,
                        corr(&ps[f], &pi[f], true)?,
                    ])
                })
                .collect::<Result<_>>()?;
            let phases: Vec<ScalarField2D> = corrected
                .par_iter()
                .map(|[m, z, p]| tie_retrieve(z, p, m, &rc).map(|ph| ph.values))
                .collect::<Result<_>>()?;
            let plane =
                |k: usize| sum_of(&corrected.iter().map(|c| c[k].clone()).collect::<Vec<_>>());
            let avg = tie_retrieve(&plane(1)?, &plane(2)?, &plane(0)?, &rc)?.values;
            let name = format!("{}_bin_{b}", dz_dir_name(dz));
            let mut d = OutputDir::create(out.join(&name))?;
            for (f, ph) in phases.iter().enumerate() {
                d.write_field(&frame_name("phase", f), ph)?;
            }
            d.write_field("phase_avg.qpf", &avg)?;
            write_pgm(out.join(&name).join("phase_avg.pgm"), &avg)?;
            root.record_hash(&format!("{name}/{MANIFEST}"), d.finish(&s.echo())?);
            summary.push(&[
                Cell::Text("phase"),
                Cell::Num(dz),
                Cell::Num(cfg.d_factor(b)),
                Cell::Text(&mode.label()),
                Cell::Num(rc.k),
                Cell::Int(n as i64),
                Cell::Num(mean_pearson(&phases, &avg)),
            ]);
        }
    }
    root.write_bytes("summary.csv", summary.render().as_bytes())?;
    root.finish(&s.echo())?;
    println!(
        "retrieved {} bins x {} defocus values into {}",
        bins.len(),
        s.dz_mm.len(),
        out.display()
    );
    Ok(())
}

fn mean_pearson(fields: &[ScalarField2D], avg: &ScalarField2D) -> f64 {
    let v: Vec<f64> = fields
        .iter()
        .filter_map(|f| qpi_core::metrics::pearson(f, avg).ok())
        .collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn csv_out(out: &Path, name: &str, csv: &Csv, s: &Settings) -> Result<PathBuf> {
    let mut d = OutputDir::create(out)?;
    d.write_bytes(name, csv.render().as_bytes())?;
    d.finish(&s.echo())?;
    Ok(out.join(name))
}

pub fn run_scan_nrf(s: &Settings, out: &Path) -> Result<()> {
    let cfg = s.check()?;
    let grid = object_grid(s)?;
    let bins = s.bins.clone().unwrap_or_else(|| vec![1, 3, 6, 12, 25]);
    let sampler = TwinBeamSampler::new(None, grid, &cfg, 0.0)?;
    let frames: Vec<TwinBeamFrame> = (0..s.frames)
        .into_par_iter()
        .map(|f| sampler.sample(RngStream::lane(s.seed, lanes::NRF, f as u64)))
        .collect();
    let mut points = Vec::new();
    let mut csv = Csv::new(&[
        "D",
        "nrf",
        "stderr",
        "fano_signal",
        "fano_idler",
        "nrf_model",
    ]);
    for &b in &bins {
        let p = measure_nrf(&frames, b, &cfg)?;
        let fi = idler_fano(&frames, b)?;
        csv.push(&[
            Cell::Num(p.d_factor),
            Cell::Num(p.nrf),
            Cell::Num(p.stderr),
            Cell::Num(p.fano),
            Cell::Num(fi),
            Cell::Num(nrf_predicted(cfg.twin.eta0, p.d_factor, cfg.twin.epsilon)),
        ]);
        points.push(p);
    }
    let mut fit_csv = Csv::new(&["eta0", "se_eta0", "epsilon", "se_epsilon"]);
    match fit_efficiencies(&points) {
        Ok(f) => {
            fit_csv.push(&[
                Cell::Num(f.eta0),
                Cell::Num(f.se_eta0),
                Cell::Num(f.epsilon),
                Cell::Num(f.se_epsilon),
            ]);
            println!(
                "fit: eta0 = {} epsilon = {}",
                fmt_num(f.eta0),
                fmt_num(f.epsilon)
            );
        }
        Err(e) => println!("efficiency fit skipped: {e}"),
    }
    let mut d = OutputDir::create(out)?;
    d.write_bytes("nrf.csv", csv.render().as_bytes())?;
    d.write_bytes("fit.csv", fit_csv.render().as_bytes())?;
    d.finish(&s.echo())?;
    println!("wrote {}", out.join("nrf.csv").display());
    Ok(())
}

pub fn run_scan_advantage(s: &Settings, out: &Path) -> Result<()> {
    let cfg = s.check()?;
    let obj = target_object(s)?;
    let bins = s.bins.clone().unwrap_or_else(|| vec![1, 3, 6, 12]);
    let modes = match s.k_mode {
        Some(m) => vec![m],
        None => vec![KMode::TieOpt, KMode::TauOpt],
    };
    let mut csv = Csv::new(&["dz", "D", "k_mode", "C_quant", "C_clas", "ratio", "stderr"]);
    for (j, &dz) in s.dz_mm.iter().enumerate() {
        let planes = PlaneSamplers::new(&obj, &cfg, dz)?;
        let idler_mean = planes.zero.expected_idler_registered();
        let stacks: Vec<StackFrames> = (0..s.frames)
            .into_par_iter()
            .map(|f| planes.stack(s.seed, j, f))
            .collect();
        for &b in &bins {
            let base = RetrievalConfig::new(&cfg, dz, KMode::Classical, b)?;
            let reference = planes.reference(s.ref_frames, s.seed, j, &base)?;
            for &m in &modes {
                let rc = base.with_k(m, &cfg);
                let a = quantum_advantage(&stacks, &idler_mean, &rc, &reference, cfg.d_factor(b))?;
                csv.push(&[
                    Cell::Num(dz),
                    Cell::Num(a.d_factor),
                    Cell::Text(&m.label()),
                    Cell::Num(a.c_quant),
                    Cell::Num(a.c_clas),
                    Cell::Num(a.ratio),
                    Cell::Num(a.stderr),
                ]);
            }
        }
    }
    let path = csv_out(out, "advantage.csv", &csv, s)?;
    println!("wrote {} ({} rows)", path.display(), csv.rows());
    Ok(())
}

pub fn run_scan_resolution(s: &Settings, out: &Path) -> Result<()> {
    let cfg = s.check()?;
    let obj = target_object(s)?;
    let bins = s.bins.clone().unwrap_or_else(|| vec![1, 3, 6, 12]);
    let scan = resolution_scan(&obj, &s.dz_mm, &bins, &cfg, s.ref_frames, s.seed)?;
    let mut csv = Csv::new(&["dz", "D", "r_phase_um", "se_r_um"]);
    for p in &scan.points {
        let (r, se) = match &p.fit {
            Ok(f) => (f.r_phase, f.se_r),
            Err(_) => (f64::NAN, f64::NAN),
        };
        csv.push(&[
            Cell::Num(p.dz_mm),
            Cell::Num(p.d_factor),
            Cell::Num(r),
            Cell::Num(se),
        ]);
    }
    let path = csv_out(out, "resolution.csv", &csv, s)?;
    println!(
        "wrote {}; monotone in D: {}, monotone in dz: {}",
        path.display(),
        scan.monotone_in_d,
        scan.monotone_in_dz
    );
    Ok(())
}

pub fn run_scan_noise(s: &Settings, out: &Path) -> Result<()> {
    let cfg = s.check()?;
    let grid = object_grid(s)?;
    let dz = s.dz_mm.first().copied().unwrap_or(0.025);
    let pts = noise_suppression_scan(
        &s.noise_l_um,
        grid,
        dz,
        s.noise_i0,
        cfg.optical.wavenumber(),
        s.noise_trials,
        s.seed,
    )?;
    let mut csv = Csv::new(&["l_cff_um", "suppression_pct"]);
    for p in &pts {
        csv.push(&[Cell::Num(p.l_cff_um), Cell::Num(p.suppression_pct)]);
    }
    let path = csv_out(out, "noise.csv", &csv, s)?;
    println!("wrote {}", path.display());
    Ok(())
}
