//! Model parameters, unit conventions, and rotating-frame detunings.
//!
//! All frequencies and rates are expressed in units of the first pump
//! frequency `omega1`, which is therefore `1.0` by construction. A physical
//! anchor `omega1_hz` (default `1e15` s⁻¹) converts laboratory values into
//! scaled units: any frequency-like config key `k` may be supplied as `k_hz`
//! instead, in which case the value is divided by `omega1_hz`.
//!
//! The three field frequencies obey the four-wave-mixing energy-matching
//! relation `omega3 = 2*omega1 - omega2`; `omega3` may be given explicitly
//! only if it is consistent with that relation.

use num_complex::Complex64;
use serde_json::Value;
use std::collections::BTreeMap;
use thiserror::Error;

/// Calibrated default configuration shipped with the crate.
///
/// The couplings and drives in this file were produced by the calibration
/// search ([`crate::sweep::calibrate_defaults`]) against the default targets
/// (suppression ≤ 1e-3 at the two-level-system resonance, enhancement ≥ 10 at
/// the interior maximum) and are the reference point for the regression suite.
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../configs/default.json");

/// Natural-log vs log-base-2 reporting for logarithmic negativity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    /// Natural logarithm (values in nats). The default; all file output uses it.
    E,
    /// Base-2 logarithm (values in bits).
    Two,
}

impl LogBase {
    pub fn as_str(self) -> &'static str {
        match self {
            LogBase::E => "e",
            LogBase::Two => "2",
        }
    }

    /// ln of the base, used to rescale natural-log results.
    pub fn ln(self) -> f64 {
        match self {
            LogBase::E => 1.0,
            LogBase::Two => std::f64::consts::LN_2,
        }
    }
}

/// Complete, validated parameter set for the three-mode device.
///
/// Mode index convention everywhere in the crate: `0, 1, 2` are the fields at
/// `omega1`, `omega2`, `omega3` respectively; each has one cavity mode and one
/// plasmon mode. `gamma` are the plasmon amplitude decay rates entering the
/// steady-state equations, while `gamma_noise` are the (much smaller)
/// noise-memory decay rates entering the linearized fluctuation dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub omega1: f64,
    pub omega2: f64,
    /// Always equals `2*omega1 - omega2`.
    pub omega3: f64,
    /// Cavity resonance frequencies.
    pub omega_c: [f64; 3],
    /// Plasmon resonance frequencies.
    pub omega_a: [f64; 3],
    /// Two-level-system (quantum emitter) transition frequency.
    pub omega_qe: f64,
    /// Cavity-plasmon couplings.
    pub g: [Complex64; 3],
    /// Emitter-plasmon coupling (real, ≥ 0).
    pub f: f64,
    /// Four-wave-mixing nonlinearity (≥ 0).
    pub chi_fwm: f64,
    /// Classical pump amplitudes driving cavities 1 and 2.
    pub eps_l: [f64; 2],
    /// Cavity amplitude decay rates.
    pub kappa: [f64; 3],
    /// Plasmon amplitude decay rates (steady state).
    pub gamma: [f64; 3],
    /// Plasmon noise-memory decay rates (fluctuations).
    pub gamma_noise: [f64; 3],
    /// Emitter coherence decay rate.
    pub gamma_eg: f64,
    /// Emitter population decay rate.
    pub gamma_ee: f64,
    /// Output coupling constants; default `sqrt(2*kappa_i)`.
    pub r_out: [f64; 3],
    /// Sign of the direct input term in the input-output relation (±1).
    ///
    /// The default `-1` is the choice for which an uncoupled cavity reflects
    /// vacuum as exactly vacuum with `r_out = sqrt(2*kappa)`; see
    /// [`crate::measures::output_covariance`].
    pub io_sign: f64,
    /// Log base used when reporting logarithmic negativity.
    pub logneg_base: LogBase,
    /// Physical value of `omega1` in s⁻¹, used only for `_hz` key conversion.
    pub omega1_hz: f64,
    /// Voltage-map offset: emitter frequency at 0 V. Defaults to `omega3`.
    pub volt_anchor: f64,
    /// Voltage-map slope in units of `omega1` per volt.
    ///
    /// Default derived from a 10 meV/V Stark shift at the `omega1_hz` anchor:
    /// ħω₁ = 0.6582119569 eV, so 10 meV/V = 1.5193094144887254e-2 ω₁/V.
    pub volt_slope: f64,
}

/// Rotating-frame detunings of every oscillator from its field frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detunings {
    /// `omega_c[i] - omega_i`.
    pub delta_c: [f64; 3],
    /// `omega_a[i] - omega_i`.
    pub delta_a: [f64; 3],
    /// `omega_qe - omega3`.
    pub delta_qe: f64,
}

/// Configuration errors; all carry enough context to identify the bad key.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config must be a JSON object of key-value pairs")]
    NotAnObject,
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` must be a finite number")]
    NotANumber { key: String },
    #[error("config key `{key}` must be a string")]
    NotAString { key: String },
    #[error("config gives both `{key}` and `{key}_hz`")]
    DuplicateForms { key: String },
    #[error("config key `{key}` must be positive, got {value}")]
    NonPositive { key: String, value: f64 },
    #[error("config key `{key}` must be non-negative, got {value}")]
    Negative { key: String, value: f64 },
    #[error("omega3 = {got} conflicts with 2*omega1 - omega2 = {expected}")]
    InconsistentOmega3 { expected: f64, got: f64 },
    #[error("io_sign must be +1 or -1, got {0}")]
    InvalidIoSign(f64),
    #[error("logneg_base must be \"e\" or \"2\", got {0:?}")]
    InvalidLogBase(String),
}

/// Keys that may carry an `_hz` suffix for physical-unit entry.
const HZ_CONVERTIBLE: &[&str] = &[
    "omega2", "omega3", "omega_c1", "omega_c2", "omega_c3", "omega_a1", "omega_a2", "omega_a3",
    "omega_qe", "g1", "g2", "g3", "g1_im", "g2_im", "g3_im", "f", "chi_fwm", "eps_l1", "eps_l2",
    "kappa1", "kappa2", "kappa3", "gamma1", "gamma2", "gamma3", "gamma_noise1", "gamma_noise2",
    "gamma_noise3", "gamma_eg", "gamma_ee", "volt_anchor",
];

/// All recognized config keys (besides the `_hz` forms of [`HZ_CONVERTIBLE`]).
const KNOWN_KEYS: &[&str] = &[
    "omega1", "omega2", "omega3", "omega_c1", "omega_c2", "omega_c3", "omega_a1", "omega_a2",
    "omega_a3", "omega_qe", "g1", "g2", "g3", "g1_im", "g2_im", "g3_im", "f", "chi_fwm", "eps_l1",
    "eps_l2", "kappa1", "kappa2", "kappa3", "gamma1", "gamma2", "gamma3", "gamma_noise1",
    "gamma_noise2", "gamma_noise3", "gamma_eg", "gamma_ee", "r1", "r2", "r3", "io_sign",
    "logneg_base", "omega1_hz", "volt_anchor", "volt_slope", "provenance",
];

fn value_as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    let x = v.as_f64().ok_or_else(|| ConfigError::NotANumber { key: key.to_string() })?;
    if !x.is_finite() {
        return Err(ConfigError::NotANumber { key: key.to_string() });
    }
    Ok(x)
}

/// Parse a JSON config string, overlay it on the shipped defaults, and
/// validate the result.
pub fn make_params(config: &str) -> Result<SystemParams, ConfigError> {
    let user: Value = serde_json::from_str(config)?;
    let user = user.as_object().ok_or(ConfigError::NotAnObject)?;

    let defaults: Value =
        serde_json::from_str(DEFAULT_CONFIG_JSON).expect("embedded default config parses");
    let mut map: BTreeMap<String, Value> = defaults
        .as_object()
        .expect("embedded default config is an object")
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    // The Hz reference may itself be overridden, and is needed to fold `_hz`
    // keys; resolve it before the overlay.
    let omega1_hz = match user.get("omega1_hz") {
        Some(v) => value_as_f64("omega1_hz", v)?,
        None => value_as_f64("omega1_hz", &map["omega1_hz"])?,
    };
    if omega1_hz <= 0.0 {
        return Err(ConfigError::NonPositive { key: "omega1_hz".into(), value: omega1_hz });
    }

    // Sort user keys for deterministic error reporting.
    let user: BTreeMap<&String, &Value> = user.iter().collect();
    for (key, value) in user {
        if let Some(base) = key.strip_suffix("_hz") {
            if key == "omega1_hz" {
                map.insert(key.clone(), value.clone());
                continue;
            }
            if !HZ_CONVERTIBLE.contains(&base) {
                return Err(ConfigError::UnknownKey(key.clone()));
            }
            let x = value_as_f64(key, value)? / omega1_hz;
            map.insert(base.to_string(), Value::from(x));
            continue;
        }
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        map.insert(key.clone(), value.clone());
    }

    // Reject simultaneous plain and `_hz` forms of the same key from the user
    // config itself (the overlay above would otherwise silently prefer one).
    let user: Value = serde_json::from_str(config)?;
    let user = user.as_object().unwrap();
    for base in HZ_CONVERTIBLE {
        if user.contains_key(*base) && user.contains_key(&format!("{base}_hz")) {
            return Err(ConfigError::DuplicateForms { key: (*base).to_string() });
        }
    }

    build_params(&map)
}

fn build_params(map: &BTreeMap<String, Value>) -> Result<SystemParams, ConfigError> {
    let num = |key: &str| -> Result<f64, ConfigError> {
        value_as_f64(key, map.get(key).expect("defaulted key present"))
    };
    let opt_num = |key: &str| -> Result<Option<f64>, ConfigError> {
        map.get(key).map(|v| value_as_f64(key, v)).transpose()
    };
    let positive = |key: &str| -> Result<f64, ConfigError> {
        let x = num(key)?;
        if x <= 0.0 {
            return Err(ConfigError::NonPositive { key: key.to_string(), value: x });
        }
        Ok(x)
    };
    let non_negative = |key: &str| -> Result<f64, ConfigError> {
        let x = num(key)?;
        if x < 0.0 {
            return Err(ConfigError::Negative { key: key.to_string(), value: x });
        }
        Ok(x)
    };

    let omega1 = positive("omega1")?;
    let omega2 = positive("omega2")?;
    let omega3_expected = 2.0 * omega1 - omega2;
    if omega3_expected <= 0.0 {
        return Err(ConfigError::NonPositive { key: "omega3".into(), value: omega3_expected });
    }
    let omega3 = match opt_num("omega3")? {
        Some(got) => {
            if (got - omega3_expected).abs() > 1e-12 * omega3_expected.max(1.0) {
                return Err(ConfigError::InconsistentOmega3 { expected: omega3_expected, got });
            }
            omega3_expected
        }
        None => omega3_expected,
    };

    let omega_c = [positive("omega_c1")?, positive("omega_c2")?, positive("omega_c3")?];
    let omega_a = [positive("omega_a1")?, positive("omega_a2")?, positive("omega_a3")?];
    let omega_qe = positive("omega_qe")?;

    let g = [
        Complex64::new(num("g1")?, opt_num("g1_im")?.unwrap_or(0.0)),
        Complex64::new(num("g2")?, opt_num("g2_im")?.unwrap_or(0.0)),
        Complex64::new(num("g3")?, opt_num("g3_im")?.unwrap_or(0.0)),
    ];
    let f = non_negative("f")?;
    let chi_fwm = non_negative("chi_fwm")?;
    let eps_l = [num("eps_l1")?, num("eps_l2")?];

    let kappa = [positive("kappa1")?, positive("kappa2")?, positive("kappa3")?];
    let gamma = [positive("gamma1")?, positive("gamma2")?, positive("gamma3")?];
    let gamma_noise =
        [positive("gamma_noise1")?, positive("gamma_noise2")?, positive("gamma_noise3")?];
    let gamma_eg = positive("gamma_eg")?;
    let gamma_ee = positive("gamma_ee")?;

    let mut r_out = [0.0; 3];
    for i in 0..3 {
        r_out[i] = match opt_num(["r1", "r2", "r3"][i])? {
            Some(r) if r <= 0.0 => {
                return Err(ConfigError::NonPositive {
                    key: ["r1", "r2", "r3"][i].to_string(),
                    value: r,
                });
            }
            Some(r) => r,
            None => (2.0 * kappa[i]).sqrt(),
        };
    }

    let io_sign = num("io_sign")?;
    if io_sign != 1.0 && io_sign != -1.0 {
        return Err(ConfigError::InvalidIoSign(io_sign));
    }

    let logneg_base = match map.get("logneg_base") {
        None => LogBase::E,
        Some(v) => {
            let s = v.as_str().ok_or_else(|| ConfigError::NotAString {
                key: "logneg_base".into(),
            })?;
            match s {
                "e" => LogBase::E,
                "2" => LogBase::Two,
                other => return Err(ConfigError::InvalidLogBase(other.to_string())),
            }
        }
    };

    let omega1_hz = positive("omega1_hz")?;
    let volt_anchor = match opt_num("volt_anchor")? {
        Some(a) => {
            if a <= 0.0 {
                return Err(ConfigError::NonPositive { key: "volt_anchor".into(), value: a });
            }
            a
        }
        None => omega3,
    };
    let volt_slope = num("volt_slope")?;

    Ok(SystemParams {
        omega1,
        omega2,
        omega3,
        omega_c,
        omega_a,
        omega_qe,
        g,
        f,
        chi_fwm,
        eps_l,
        kappa,
        gamma,
        gamma_noise,
        gamma_eg,
        gamma_ee,
        r_out,
        io_sign,
        logneg_base,
        omega1_hz,
        volt_anchor,
        volt_slope,
    })
}

impl SystemParams {
    /// The calibrated default parameter set (the embedded config).
    pub fn calibrated() -> Self {
        make_params("{}").expect("embedded default config is valid")
    }

    /// Field frequencies by mode index.
    pub fn omega_field(&self) -> [f64; 3] {
        [self.omega1, self.omega2, self.omega3]
    }

    /// Serialize back to the flat key-value form accepted by [`make_params`].
    ///
    /// All derivable keys are written explicitly, so the result is a complete
    /// standalone record of the resolved parameters.
    pub fn to_flat_map(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            m.insert(k.to_string(), Value::from(v));
        };
        put("omega1", self.omega1);
        put("omega2", self.omega2);
        put("omega3", self.omega3);
        for i in 0..3 {
            put(["omega_c1", "omega_c2", "omega_c3"][i], self.omega_c[i]);
            put(["omega_a1", "omega_a2", "omega_a3"][i], self.omega_a[i]);
            put(["g1", "g2", "g3"][i], self.g[i].re);
            if self.g[i].im != 0.0 {
                put(["g1_im", "g2_im", "g3_im"][i], self.g[i].im);
            }
            put(["kappa1", "kappa2", "kappa3"][i], self.kappa[i]);
            put(["gamma1", "gamma2", "gamma3"][i], self.gamma[i]);
            put(["gamma_noise1", "gamma_noise2", "gamma_noise3"][i], self.gamma_noise[i]);
            put(["r1", "r2", "r3"][i], self.r_out[i]);
        }
        put("omega_qe", self.omega_qe);
        put("f", self.f);
        put("chi_fwm", self.chi_fwm);
        put("eps_l1", self.eps_l[0]);
        put("eps_l2", self.eps_l[1]);
        put("gamma_eg", self.gamma_eg);
        put("gamma_ee", self.gamma_ee);
        put("io_sign", self.io_sign);
        put("omega1_hz", self.omega1_hz);
        put("volt_anchor", self.volt_anchor);
        put("volt_slope", self.volt_slope);
        m.insert("logneg_base".into(), Value::from(self.logneg_base.as_str()));
        m
    }

    /// Canonical JSON text of the resolved parameters (sorted keys).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.to_flat_map()).expect("flat map serializes")
    }

    /// SHA-256 of [`Self::canonical_json`], hex-encoded; used in run manifests.
    pub fn config_sha256(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(hex, "{byte:02x}").unwrap();
        }
        hex
    }
}

/// Rotating-frame detunings for the given parameters.
///
/// Each oscillator is referred to the frame of the field it dresses:
/// cavity/plasmon pair `i` to `omega_i`, the emitter to `omega3`.
pub fn detunings(p: &SystemParams) -> Detunings {
    let w = p.omega_field();
    Detunings {
        delta_c: [p.omega_c[0] - w[0], p.omega_c[1] - w[1], p.omega_c[2] - w[2]],
        delta_a: [p.omega_a[0] - w[0], p.omega_a[1] - w[1], p.omega_a[2] - w[2]],
        delta_qe: p.omega_qe - p.omega3,
    }
}

/// Affine gate-voltage model for the emitter transition frequency.
///
/// `anchor` is the transition frequency at 0 V and `slope` the Stark-shift
/// rate in `omega1` per volt; see [`SystemParams::volt_slope`] for how the
/// default slope is derived from a 10 meV/V shift.
pub fn volt_to_omega(volts: f64, anchor: f64, slope: f64) -> f64 {
    anchor + slope * volts
}
