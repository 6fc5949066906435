//! One function per pipeline stage. Every stage reads its upstream artifacts
//! from the run directory and writes its own; nothing is passed in memory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use geolorenz::cone::{calibrate, direction_from_backward, hyperbolic_jump_sequence, lyapunov_exponents, ConeConstants, LyapunovInput};
use geolorenz::leaves::local_unstable_leaf;
use geolorenz::lorenz_map::{validate_params, LorenzMap};
use geolorenz::millefeuille::{build_millefeuille, markov_check, Band, MilleFeuilles, ENDPOINT_TOL};
use geolorenz::report::{num, Table};
use geolorenz::symbolic::delta_dense_periodic_orbit;
use geolorenz::thermo::{
    cross_millefeuille_pressure, holder_constants_estimate, kac_integrals, pressure_curve, pressure_root, solve_pressure_root, spectral_solve,
    zc_estimate, CaseReport, HolderEstimate, InducedTable, PressureOptions, ZcEstimate, CASE_MARGIN, RESIDUAL_TOL, ROOT_TOL,
};

use crate::config::RunConfig;

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING: i32 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    Validate,
    Cones,
    Leaf,
    Millefeuille,
    Spectrum,
    Pressure,
    Classify,
    Compare,
}

impl Stage {
    pub const PIPELINE: [Stage; 7] =
        [Stage::Validate, Stage::Cones, Stage::Leaf, Stage::Millefeuille, Stage::Spectrum, Stage::Pressure, Stage::Classify];

    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Validate => 3,
            Stage::Cones => 4,
            Stage::Leaf => 5,
            Stage::Millefeuille => 6,
            Stage::Spectrum => 7,
            Stage::Pressure => 8,
            Stage::Classify => 9,
            Stage::Compare => 10,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Cones => "cones",
            Stage::Leaf => "leaf",
            Stage::Millefeuille => "millefeuille",
            Stage::Spectrum => "spectrum",
            Stage::Pressure => "pressure",
            Stage::Classify => "classify",
            Stage::Compare => "compare",
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl Failure {
    fn stage(stage: Stage, e: impl fmt::Display) -> Self {
        Failure { code: stage.exit_code(), msg: format!("stage {} failed: {e}", stage.name()) }
    }

    fn io(path: &Path, e: impl fmt::Display) -> Self {
        Failure { code: EXIT_IO, msg: format!("{}: {e}", path.display()) }
    }
}

type Res<T> = Result<T, Failure>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tolerances {
    series_tol: f64,
    residual_tol: f64,
    root_tol: f64,
    case_margin: f64,
    endpoint_tol: f64,
}

/// JSON artifact with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Artifact<B> {
    config_hash: String,
    tolerances: Tolerances,
    body: B,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpectrumBody {
    holder: HolderEstimate<f64>,
    zc: ZcEstimate<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PressureBody {
    root: f64,
    lambda: f64,
    tau_mean: f64,
    free_energy: f64,
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub hash: String,
    pub dir: PathBuf,
    map: LorenzMap<f64>,
}

impl Ctx {
    pub fn new(cfg: RunConfig, out: &Path) -> Res<Self> {
        let hash = cfg.hash();
        let dir = out.join(&hash[..16]);
        fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
        let map = LorenzMap::new(cfg.map.clone());
        Ok(Ctx { cfg, hash, dir, map })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            series_tol: self.cfg.series_tol,
            residual_tol: RESIDUAL_TOL,
            root_tol: ROOT_TOL,
            case_margin: CASE_MARGIN,
            endpoint_tol: ENDPOINT_TOL,
        }
    }

    fn header(&self, mut t: Table) -> Table {
        let extra = [
            ("config_hash", self.hash.clone()),
            ("series_tol", num(self.cfg.series_tol)),
            ("residual_tol", num(RESIDUAL_TOL)),
            ("root_tol", num(ROOT_TOL)),
        ];
        for (k, v) in extra {
            if !t.meta.iter().any(|(key, _)| key == k) {
                t = t.meta(k, v);
            }
        }
        t
    }

    fn write(&self, name: &str, text: &str) -> Res<()> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| Failure::io(&p, e))?;
        log::info!("wrote {}", p.display());
        Ok(())
    }

    fn write_csv(&self, name: &str, t: Table) -> Res<()> {
        self.write(name, &self.header(t).to_csv())
    }

    fn write_json<B: Serialize>(&self, name: &str, body: B) -> Res<()> {
        let a = Artifact { config_hash: self.hash.clone(), tolerances: self.tolerances(), body };
        let mut text = serde_json::to_string_pretty(&a).expect("plain data serializes");
        text.push('\n');
        self.write(name, &text)
    }

    fn read_json<B: DeserializeOwned>(&self, name: &str, producer: Stage) -> Res<B> {
        let p = self.path(name);
        let text = fs::read_to_string(&p).map_err(|_| Failure {
            code: EXIT_MISSING,
            msg: format!("missing artifact {} (run the `{}` stage first)", p.display(), producer.name()),
        })?;
        let a: Artifact<B> = serde_json::from_str(&text).map_err(|e| Failure::io(&p, e))?;
        Ok(a.body)
    }

    fn opts(&self) -> PressureOptions {
        PressureOptions {
            grid_size: self.cfg.grid_size,
            series_tol: self.cfg.series_tol,
            z_bracket: self.cfg.z_bracket,
            holder_pairs: self.cfg.holder_pairs,
            seed: self.cfg.seed,
            max_iter: self.cfg.max_iter,
        }
    }

    pub fn run(&self, stage: Stage) -> Res<()> {
        log::info!("stage {} (config {})", stage.name(), &self.hash[..16]);
        match stage {
            Stage::Validate => self.validate(),
            Stage::Cones => self.cones(),
            Stage::Leaf => self.leaf(),
            Stage::Millefeuille => self.millefeuille(),
            Stage::Spectrum => self.spectrum(),
            Stage::Pressure => self.pressure(),
            Stage::Classify => self.classify(),
            Stage::Compare => self.compare(),
        }
    }

    fn validate(&self) -> Res<()> {
        let rep = validate_params(&self.cfg.map);
        let text = format!("# config_hash: {}\n{}", self.hash, rep.to_kv_text());
        self.write("validation.txt", &text)?;
        if !rep.all_passed() {
            return Err(Failure::stage(Stage::Validate, format!("failed checks: {}", rep.failures().join(", "))));
        }
        Ok(())
    }

    fn cones(&self) -> Res<()> {
        let st = Stage::Cones;
        let m = &self.map;
        let consts = ConeConstants::of_map(m);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let cal = calibrate(m, &mut rng, self.cfg.cone_orbits, self.cfg.cone_depth.min(25));
        let depth = self.cfg.cone_depth;
        let mut cones = Table::new(&["orbit", "x", "y", "max_gap", "jumps", "slope", "slope_error"])
            .meta("alpha", num(consts.alpha))
            .meta("K_hat", num(consts.k_hat))
            .meta("N_alpha", consts.n_alpha)
            .meta("C_hat", num(cal.c_hat))
            .meta("kappa", num(cal.kappa))
            .meta("depth", depth);
        let mut lyap = Table::new(&["orbit", "lambda_s", "lambda_u"]).meta("length", depth);
        for k in 0..self.cfg.cone_orbits {
            let s = m.sample_backward_orbit(&mut rng, depth, 5);
            let rec = hyperbolic_jump_sequence(m, &s.points).map_err(|e| Failure::stage(st, e))?;
            if rec.max_gap() > consts.n_alpha {
                return Err(Failure::stage(st, format!("orbit {k}: hyperbolic jump gap {} exceeds N(alpha) = {}", rec.max_gap(), consts.n_alpha)));
            }
            let d = direction_from_backward(m, &s.points, depth.min(30)).map_err(|e| Failure::stage(st, e))?;
            cones.push(vec![
                k.to_string(),
                num(s.p.x),
                num(s.p.y),
                rec.max_gap().to_string(),
                rec.gaps.len().to_string(),
                num(d.slope),
                num(d.error),
            ]);
            match m.forward_orbit(s.p, depth).and_then(|o| lyapunov_exponents(m, LyapunovInput::Orbit(&o))) {
                Ok(l) => lyap.push(vec![k.to_string(), num(l.lambda_s), num(l.lambda_u)]),
                Err(e) => log::warn!("orbit {k}: no Lyapunov average ({e})"),
            }
        }
        self.write_csv("cones.csv", cones)?;
        self.write_csv("lyapunov.csv", lyap)
    }

    fn leaf(&self) -> Res<()> {
        let m = &self.map;
        let depth = self.cfg.leaf_depth;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut last = String::new();
        for _ in 0..50 {
            let s = m.sample_backward_orbit(&mut rng, depth, 5);
            match local_unstable_leaf(m, s.p, &s.word, depth) {
                Ok(leaf) => {
                    let mut t = Table::new(&["x", "y"])
                        .meta("seed_x", num(s.p.x))
                        .meta("seed_y", num(s.p.y))
                        .meta("depth", depth)
                        .meta("domain", format!("{} {}", num(leaf.domain.0), num(leaf.domain.1)))
                        .meta("lipschitz_bound", num(leaf.lipschitz_bound))
                        .meta("vertical_error", num(leaf.vertical_error))
                        .meta("ends", format!("{:?} {:?}", leaf.left_end_kind, leaf.right_end_kind));
                    for p in &leaf.samples {
                        t.push(vec![num(p.x), num(p.y)]);
                    }
                    return self.write_csv("leaf.csv", t);
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(Failure::stage(Stage::Leaf, format!("no leaf on 50 sampled orbits: {last}")))
    }

    fn millefeuille(&self) -> Res<()> {
        let st = Stage::Millefeuille;
        let mf = self.build_mf(self.cfg.delta_hat).map_err(|e| Failure::stage(st, e))?;
        let ok: Vec<bool> = mf.branches.iter().map(|b| markov_check(&self.map, &mf, b, self.cfg.markov_leaves).passed()).collect();
        self.write_csv("branches.csv", mf.branch_table(&ok))?;
        self.write("millefeuille.txt", &format!("# config_hash: {}\n{}", self.hash, mf.summary()))?;
        self.write_json("millefeuille.json", &mf)?;
        let bad = ok.iter().filter(|&&o| !o).count();
        if bad > 0 {
            return Err(Failure::stage(st, format!("{bad} branches fail the Markov check")));
        }
        Ok(())
    }

    fn build_mf(&self, delta_hat: f64) -> geolorenz::Result<MilleFeuilles<f64>> {
        let d = delta_dense_periodic_orbit(&self.map, delta_hat, self.cfg.max_period)?;
        let band = Band::from_dense(&self.map, &d, delta_hat)?;
        build_millefeuille(&self.map, band, self.cfg.n_max, self.cfg.leaf_depth)
    }

    fn cached_mf(&self) -> Res<MilleFeuilles<f64>> {
        let mf: MilleFeuilles<f64> = self.read_json("millefeuille.json", Stage::Millefeuille)?;
        log::info!("reusing cached branch table ({} branches) from {}", mf.branches.len(), self.path("millefeuille.json").display());
        Ok(mf)
    }

    fn table(&self, mf: &MilleFeuilles<f64>, st: Stage) -> Res<InducedTable<f64>> {
        InducedTable::build(&self.map, mf, &self.cfg.potential, self.cfg.grid_size, self.cfg.series_tol).map_err(|e| Failure::stage(st, e))
    }

    fn z_grid(&self, zc: f64) -> Vec<f64> {
        let lo = self.cfg.z_bracket.0.max(zc + 0.05);
        let hi = self.cfg.z_bracket.1.max(lo + 0.1);
        let n = self.cfg.z_points;
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    /// Table with the Hölder data of the spectrum stage attached.
    fn calibrated(&self, st: Stage) -> Res<(InducedTable<f64>, SpectrumBody)> {
        let mf = self.cached_mf()?;
        let spectrum: SpectrumBody = self.read_json("spectrum.json", Stage::Spectrum)?;
        let mut t = self.table(&mf, st)?;
        t.c_a = spectrum.holder.c_a;
        t.gamma = spectrum.holder.gamma;
        Ok((t, spectrum))
    }

    fn spectrum(&self) -> Res<()> {
        let st = Stage::Spectrum;
        let mf = self.cached_mf()?;
        let mut t = self.table(&mf, st)?;
        let holder = holder_constants_estimate(&self.map, &t, mf.band.delta_hat, self.cfg.holder_pairs, self.cfg.seed).map_err(|e| Failure::stage(st, e))?;
        t.c_a = holder.c_a;
        t.gamma = holder.gamma;
        let zc = zc_estimate(&t).map_err(|e| Failure::stage(st, e))?;
        let mut csv = Table::new(&["Z", "lambda", "log_lambda", "tau_mean", "residual", "power_iter_rate", "iterations", "interp_error"])
            .meta("N_max", t.n_max)
            .meta("grid_size", t.grid_size())
            .meta("Z_c_estimate", num(zc.z_c))
            .meta("C_A", num(holder.c_a))
            .meta("gamma", num(holder.gamma));
        let mut warm: Option<Vec<f64>> = None;
        for z in self.z_grid(zc.z_c) {
            let sp = spectral_solve(&t, z, self.cfg.max_iter, warm.as_deref()).map_err(|e| Failure::stage(st, e))?;
            let kac = kac_integrals(&t, &sp);
            csv.push(vec![
                num(z),
                num(sp.lambda),
                num(sp.log_lambda()),
                num(kac.tau_mean),
                num(sp.residual),
                num(sp.power_iter_rate),
                sp.iterations.to_string(),
                num(sp.interp_error),
            ]);
            warm = Some(sp.h);
        }
        self.write_csv("spectrum.csv", csv)?;
        self.write_json("spectrum.json", SpectrumBody { holder, zc })
    }

    fn pressure(&self) -> Res<()> {
        let st = Stage::Pressure;
        let (t, spectrum) = self.calibrated(st)?;
        let (root, sp, kac) = pressure_root(&t, self.cfg.z_bracket, self.cfg.max_iter).map_err(|e| Failure::stage(st, e))?;
        let curve = pressure_curve(&t, &spectrum.zc, &self.z_grid(spectrum.zc.z_c), self.cfg.max_iter).map_err(|e| Failure::stage(st, e))?;
        self.write_csv("pressure_curve.csv", curve)?;
        let free_energy = geolorenz::thermo::free_energy(root, &sp, &kac);
        self.write_json("pressure.json", PressureBody { root, lambda: sp.lambda, tau_mean: kac.tau_mean, free_energy })
    }

    fn classify(&self) -> Res<()> {
        let st = Stage::Classify;
        let (t, spectrum) = self.calibrated(st)?;
        let _: PressureBody = self.read_json("pressure.json", Stage::Pressure)?;
        let rep: CaseReport<f64> = solve_pressure_root(&t, &spectrum.zc, self.cfg.z_bracket, self.cfg.max_iter).map_err(|e| Failure::stage(st, e))?;
        log::info!("case {:?}, Z_c {:.6}, truncated root {:.6}", rep.case, rep.z_c_estimate, rep.truncated_root);
        self.write_json("case_report.json", &rep)
    }

    fn compare(&self) -> Res<()> {
        let st = Stage::Compare;
        let Some(db) = self.cfg.compare_delta_hat else {
            return Err(Failure { code: EXIT_CONFIG, msg: "compare needs [compare] delta_hat in the config".into() });
        };
        let a = self.cached_mf()?;
        let b = self.build_mf(db).map_err(|e| Failure::stage(st, e))?;
        let c = cross_millefeuille_pressure(&self.map, &a, &b, &self.cfg.potential, &self.opts()).map_err(|e| Failure::stage(st, e))?;
        log::info!("roots {:.6} and {:.6}, gap {:.3e}, tolerance {:.3e}", c.root_a, c.root_b, c.gap, c.tolerance_a + c.tolerance_b);
        self.write_json("comparison.json", &c)
    }
}
