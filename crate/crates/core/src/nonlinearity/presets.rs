use std::collections::BTreeMap;
use std::f64::consts::TAU;

use super::{Kind, PeriodicNonlinearity};
use crate::error::{Error, Result};

/// A named family of nonlinearities and the parameters it accepts.
#[derive(Debug, Clone, Copy)]
pub struct FamilyPreset {
    pub name: &'static str,
    pub required: &'static [&'static str],
    /// Optional parameters with their defaults.
    pub optional: &'static [(&'static str, f64)],
    pub summary: &'static str,
}

pub const PRESETS: &[FamilyPreset] = &[
    FamilyPreset {
        name: "threestable_paper",
        required: &[],
        optional: &[],
        summary: "(2+sin t)u^2(u-1)^5(4-u) for u<1, (4+sin t)u^2(u-1)^5(4-u) for u>=1, T=2pi",
    },
    FamilyPreset {
        name: "mixed_paper",
        required: &["eps", "rho"],
        optional: &[],
        summary: "eps*rho*u*exp(-rho*u)(u-1)(u-3)^3 for u<3, (4+sin t)(u-3)^3(8-u) for u>=3, T=2pi",
    },
    FamilyPreset {
        name: "bistable_cubic",
        required: &["theta"],
        optional: &[("amplitude", 0.0), ("period", 1.0)],
        summary: "(1+a sin(2pi t/T)) u(u-theta)(1-u)",
    },
    FamilyPreset {
        name: "kpp_logistic",
        required: &[],
        optional: &[("amplitude", 0.0), ("period", 1.0)],
        summary: "u(1 + a sin(2pi t/T) - u)",
    },
    FamilyPreset {
        name: "ignition_flat",
        required: &["theta"],
        optional: &[("amplitude", 0.0), ("period", 1.0)],
        summary: "(1+a sin(2pi t/T)) (u-theta)^2 (1-u) for u>theta, 0 otherwise",
    },
    FamilyPreset {
        name: "linear_periodic",
        required: &[],
        optional: &[("rate", 0.0), ("amplitude", 1.0), ("period", TAU), ("u_max", 1.0)],
        summary: "u(r + a sin(2pi t/T)); defaults give u sin t",
    },
];

fn lookup(name: &str) -> Result<&'static FamilyPreset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let known: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        Error::config(format!("unknown preset {name:?}; known presets: {}", known.join(", ")))
    })
}

fn resolve(preset: &FamilyPreset, given: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    for key in given.keys() {
        let known = preset.required.contains(&key.as_str())
            || preset.optional.iter().any(|(k, _)| k == key);
        if !known {
            return Err(Error::config(format!(
                "preset {} does not take parameter {key:?}",
                preset.name
            )));
        }
    }
    let mut out = BTreeMap::new();
    for &key in preset.required {
        let v = *given.get(key).ok_or_else(|| {
            Error::config(format!("preset {} requires parameter {key:?}", preset.name))
        })?;
        out.insert(key.to_string(), v);
    }
    for &(key, default) in preset.optional {
        out.insert(key.to_string(), given.get(key).copied().unwrap_or(default));
    }
    for (k, v) in &out {
        if !v.is_finite() {
            return Err(Error::config(format!("parameter {k} must be finite, got {v}")));
        }
    }
    Ok(out)
}

fn require(cond: bool, preset: &str, constraint: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(format!("preset {preset}: parameter constraint violated: {constraint}")))
    }
}

/// Constructs a preset nonlinearity by name.
///
/// Unknown names, unknown or missing parameters and out-of-range values are
/// configuration errors naming the violated constraint.
pub fn build_preset(name: &str, params: &BTreeMap<String, f64>) -> Result<PeriodicNonlinearity> {
    let preset = lookup(name)?;
    let p = resolve(preset, params)?;
    let get = |k: &str| p[k];
    match name {
        "threestable_paper" => PeriodicNonlinearity::new(name, TAU, 4.0, Kind::ThreeStable, p),
        "mixed_paper" => {
            let (eps, rho) = (get("eps"), get("rho"));
            require(eps > 0.0 && eps <= 1.0, name, "0 < eps <= 1")?;
            require(rho > 1.0, name, "rho > 1")?;
            PeriodicNonlinearity::new(name, TAU, 8.0, Kind::Mixed { eps, rho }, p)
        }
        "bistable_cubic" => {
            let (theta, amplitude, period) = (get("theta"), get("amplitude"), get("period"));
            require(theta > 0.0 && theta < 1.0, name, "0 < theta < 1")?;
            require(amplitude.abs() < 1.0, name, "|amplitude| < 1")?;
            require(period > 0.0, name, "period > 0")?;
            PeriodicNonlinearity::new(name, period, 1.0, Kind::BistableCubic { theta, amplitude }, p)
        }
        "kpp_logistic" => {
            let (amplitude, period) = (get("amplitude"), get("period"));
            require(amplitude.abs() < 1.0, name, "|amplitude| < 1")?;
            require(period > 0.0, name, "period > 0")?;
            // the positive periodic orbit stays below max_t (1 + a sin)
            let u_max = 1.0 + amplitude.abs();
            PeriodicNonlinearity::new(name, period, u_max, Kind::KppLogistic { amplitude }, p)
        }
        "ignition_flat" => {
            let (theta, amplitude, period) = (get("theta"), get("amplitude"), get("period"));
            require(theta > 0.0 && theta < 1.0, name, "0 < theta < 1")?;
            require(amplitude.abs() < 1.0, name, "|amplitude| < 1")?;
            require(period > 0.0, name, "period > 0")?;
            PeriodicNonlinearity::new(name, period, 1.0, Kind::IgnitionFlat { theta, amplitude }, p)
        }
        "linear_periodic" => {
            let (rate, amplitude, period, u_max) =
                (get("rate"), get("amplitude"), get("period"), get("u_max"));
            require(period > 0.0, name, "period > 0")?;
            require(u_max > 0.0, name, "u_max > 0")?;
            PeriodicNonlinearity::new(name, period, u_max, Kind::LinearPeriodic { rate, amplitude }, p)
        }
        _ => unreachable!("lookup accepted an unlisted preset"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn unknown_name_is_config_error() {
        let err = build_preset("quartic", &params(&[])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("threestable_paper"));
    }

    #[test]
    fn mixed_requires_rho_above_one() {
        let err = build_preset("mixed_paper", &params(&[("eps", 0.5), ("rho", 1.0)])).unwrap_err();
        assert!(err.to_string().contains("rho > 1"), "{err}");
        let err = build_preset("mixed_paper", &params(&[("eps", 1.5), ("rho", 2.0)])).unwrap_err();
        assert!(err.to_string().contains("eps"), "{err}");
    }

    #[test]
    fn missing_and_unknown_parameters() {
        assert!(build_preset("mixed_paper", &params(&[("eps", 0.5)])).is_err());
        assert!(build_preset("bistable_cubic", &params(&[("theta", 0.3), ("gamma", 1.0)])).is_err());
        assert!(build_preset("bistable_cubic", &params(&[("theta", f64::NAN)])).is_err());
    }

    #[test]
    fn defaults_are_filled_in() {
        let f = build_preset("linear_periodic", &params(&[])).unwrap();
        assert_eq!(f.period(), TAU);
        assert_eq!(f.params()["amplitude"], 1.0);
        let t = 0.7f64;
        assert!((f.eval(t, 2.0) - 2.0 * t.sin()).abs() < 1e-15);
    }
}
