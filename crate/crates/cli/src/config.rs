//! Optional configuration file (`--config`), TOML or JSON by extension.
//!
//! Every section is optional and command-line flags take precedence:
//!
//! ```toml
//! pitch_deg = 10.0
//! nsr = 1e-4
//!
//! [camera]          # angles in radians, lengths in cm
//! f = 0.35
//! p_h = 0.00014
//! p_v = 0.00014
//! h1 = 500.0
//! theta_p = 0.87
//!
//! [face]
//! x = 10
//! y = 12
//! width = 96
//! height = 96
//! theta_r = 0.87
//! h2 = 160.0
//!
//! [density]
//! rho_h = 6.21
//! rho_v = 4.63
//!
//! [threshold]
//! rho_h_o = 0.5
//! rho_v_o = 0.5
//!
//! [hopping]
//! q = 4
//! m = 1
//! gamma = 0.5
//! ```

use std::fs;
use std::path::Path;

use ahgmm::{CameraModel, DensityThreshold, Error, FaceRegion, PixelDensity, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub camera: Option<CameraModel>,
    pub face: Option<FaceRegion>,
    pub density: Option<PixelDensity>,
    pub threshold: Option<DensityThreshold>,
    #[serde(default)]
    pub hopping: HoppingSection,
    pub pitch_deg: Option<f64>,
    pub nsr: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingSection {
    pub q: Option<usize>,
    pub q_h: Option<usize>,
    pub q_v: Option<usize>,
    pub m: Option<usize>,
    pub gamma: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        let cfg: Self =
            parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(cam) = &cfg.camera {
            cam.validate()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("c.toml");
        fs::write(
            &toml_path,
            "pitch_deg = 10.0\n[threshold]\nrho_h_o = 0.5\nrho_v_o = 0.6\n[hopping]\nq = 8\n",
        )
        .unwrap();
        let json_path = dir.path().join("c.json");
        fs::write(
            &json_path,
            r#"{"pitch_deg": 10.0, "threshold": {"rho_h_o": 0.5, "rho_v_o": 0.6}, "hopping": {"q": 8}}"#,
        )
        .unwrap();
        for p in [toml_path, json_path] {
            let c = FileConfig::load(&p).unwrap();
            assert_eq!(c.pitch_deg, Some(10.0));
            assert_eq!(c.threshold.unwrap().rho_v_o, 0.6);
            assert_eq!(c.hopping.q, Some(8));
        }
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "colour = 3\n").unwrap();
        let err = FileConfig::load(&p).unwrap_err();
        assert_eq!(err.class(), ahgmm::ErrorClass::Config);
    }
}
