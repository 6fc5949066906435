use serde::Serialize;
use sha2::{Digest, Sha256};

use geolorenz::kv::KvDoc;
use geolorenz::lorenz_map::MapParams;
use geolorenz::thermo::{Potential, DEFAULT_GRID, DEFAULT_MAX_ITER, DEFAULT_SERIES_TOL};

/// Everything a run depends on. The output directory and thread count are
/// deliberately absent: they never change results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub map: MapParams<f64>,
    pub delta_hat: f64,
    pub max_period: usize,
    pub n_max: usize,
    pub leaf_depth: usize,
    pub grid_size: usize,
    pub z_bracket: (f64, f64),
    pub z_points: usize,
    pub series_tol: f64,
    pub holder_pairs: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub cone_orbits: usize,
    pub cone_depth: usize,
    pub markov_leaves: usize,
    pub potential: Potential<f64>,
    pub compare_delta_hat: Option<f64>,
}

fn bad(msg: impl Into<String>) -> String {
    msg.into()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let doc = KvDoc::parse(text).map_err(|e| e.to_string())?;
        let map = if doc.get("map", "preset") == Some("default") || doc.section("map").is_none() {
            MapParams::default_instance()
        } else {
            MapParams::from_kv(&doc, "map").map_err(|e| e.to_string())?
        };
        let r = |k: &str, d: f64| doc.parse_or("run", k, d).map_err(|e| e.to_string());
        let u = |k: &str, d: usize| doc.parse_or("run", k, d).map_err(|e| e.to_string());
        let p = |k: &str, d: f64| doc.parse_or("potential", k, d).map_err(|e| e.to_string());
        let potential = match doc.get("potential", "kind").unwrap_or("zero") {
            "zero" => Potential::zero(),
            "constant" => Potential::constant(p("c", 0.0)?),
            "holder" => Potential::holder_family(p("c", 0.0)?, p("a", 0.0)?, p("h", 1.0)?, p("b", 0.0)?),
            other => return Err(bad(format!("[potential] unknown kind {other:?}"))),
        };
        let cfg = RunConfig {
            map,
            delta_hat: r("delta_hat", 0.2)?,
            max_period: u("max_period", 24)?,
            n_max: u("n_max", 14)?,
            leaf_depth: u("leaf_depth", 60)?,
            grid_size: u("grid_size", DEFAULT_GRID)?,
            z_bracket: (r("z_lo", 0.0)?, r("z_hi", 3.0)?),
            z_points: u("z_points", 40)?,
            series_tol: r("series_tol", DEFAULT_SERIES_TOL)?,
            holder_pairs: u("holder_pairs", 4000)?,
            max_iter: u("max_iter", DEFAULT_MAX_ITER)?,
            seed: doc.parse_or("run", "seed", 1u64).map_err(|e| e.to_string())?,
            cone_orbits: u("cone_orbits", 100)?,
            cone_depth: u("cone_depth", 200)?,
            markov_leaves: u("markov_leaves", 3)?,
            potential,
            compare_delta_hat: match doc.get("compare", "delta_hat") {
                None => None,
                Some(s) => Some(s.parse().map_err(|_| bad(format!("[compare] delta_hat: cannot parse {s:?}")))?),
            },
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        if !(self.series_tol > 0.0) {
            return Err(bad("series_tol must be positive"));
        }
        if !(self.delta_hat > 0.0) || self.compare_delta_hat.is_some_and(|d| !(d > 0.0)) {
            return Err(bad("delta_hat must be positive"));
        }
        if !(self.z_bracket.0 < self.z_bracket.1) {
            return Err(bad("z_lo must be below z_hi"));
        }
        let h = self.potential.h;
        if !(h > 0.0 && h <= 1.0) {
            return Err(bad("[potential] h must lie in (0, 1]"));
        }
        if self.n_max == 0 || self.grid_size < 2 || self.z_points < 2 || self.max_iter == 0 {
            return Err(bad("n_max, grid_size, z_points and max_iter must be positive (grid_size, z_points >= 2)"));
        }
        if self.cone_orbits == 0 || self.cone_depth == 0 || self.leaf_depth == 0 {
            return Err(bad("cone_orbits, cone_depth and leaf_depth must be positive"));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("plain data serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
