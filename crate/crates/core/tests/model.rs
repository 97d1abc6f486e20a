use linengine::config::OracleSettings;
use linengine::model::*;
use linengine::oracle::build_bath;
use linengine::quadrature::integrate;
use linengine::Error;
use nalgebra::DVector;
use proptest::prelude::*;

fn density(gamma: f64, cutoff: f64, u: &[f64]) -> SpectralDensity {
    SpectralDensity::new(SpectralProfile::OhmicExponential { gamma, cutoff }, DVector::from_column_slice(u)).unwrap()
}

#[test]
fn spectral_density_examples() {
    let d = density(1.0, 1.0, &[1.0, 0.0]);
    assert_eq!(spectral_density_value(&d, 0.0).unwrap().norm(), 0.0);
    let v = spectral_density_value(&d, 1.0).unwrap();
    assert_eq!(v[(0, 0)], (-1.0f64).exp());
    assert_eq!(v[(1, 1)] + v[(0, 1)] + v[(1, 0)], 0.0);
    assert!(matches!(spectral_density_value(&d, -0.1), Err(Error::Domain(_))));
}

#[test]
fn integrated_density_matches_closed_form() {
    let u = [0.6, -0.8, 0.3];
    let d = density(0.7, 2.5, &u);
    let (total, _) = integrate(|w| spectral_density_value(&d, w).unwrap().trace(), &[0.0, 10.0, 40.0, 400.0], 1e-14, 1e-12).unwrap();
    let norm2: f64 = u.iter().map(|x| x * x).sum();
    let expect = 0.7 * 2.5 * 2.5 * norm2;
    assert!((total - expect).abs() < 1e-10 * expect, "{total} vs {expect}");
}

#[test]
fn occupation_examples() {
    let th = OccupationModel::Thermal { temperature: 1.0 };
    assert!((occupation(&th, 2f64.ln()).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(occupation(&th, 0.0), Err(Error::Domain(_))));
    assert_eq!(characteristic_frequency(&OccupationModel::Thermal { temperature: 3.0 }, 0.4).unwrap(), 6.0);
    let sq0 = OccupationModel::SqueezedThermal { temperature: 1.3, r: 0.0 };
    let th = OccupationModel::Thermal { temperature: 1.3 };
    for w in [0.1, 1.0, 7.0] {
        assert_eq!(occupation(&sq0, w).unwrap(), occupation(&th, w).unwrap());
    }
}

#[test]
fn squeezed_characteristic_frequency_has_the_high_temperature_limit() {
    let (t, r) = (200.0, 0.7);
    let o = OccupationModel::SqueezedThermal { temperature: t, r };
    let big = characteristic_frequency(&o, 0.01).unwrap();
    let limit = 2.0 * t * (2.0 * r).cosh();
    assert!((big - limit).abs() < 1e-6 * limit);
}

#[test]
fn tabulated_occupation_does_not_extrapolate() {
    let table = OccupationTable::new(vec![0.5, 1.0, 2.0, 4.0], vec![2.0, 1.0, 0.4, 0.05]).unwrap();
    let o = OccupationModel::Tabulated { table };
    assert_eq!(occupation(&o, 1.0).unwrap(), 1.0);
    assert!(matches!(occupation(&o, 4.5), Err(Error::OutOfRange { .. })));
    assert!(matches!(occupation(&o, 0.25), Err(Error::OutOfRange { .. })));
    let v = occupation(&o, 3.0).unwrap();
    assert!(v < 0.4 && v > 0.05);
    assert!(OccupationTable::new(vec![1.0, 0.5], vec![1.0, 2.0]).is_err());
    assert!(OccupationTable::new(vec![0.5, 1.0], vec![1.0, -2.0]).is_err());
}

#[test]
fn discretized_bath_reproduces_the_density() {
    let spec = ReservoirSpec {
        label: "b".into(),
        density: density(0.2, 1.5, &[1.0]),
        occupation: OccupationModel::Thermal { temperature: 1.0 },
    };
    let s = OracleSettings::default();
    let span = (s.span[0] * 1.5, s.span[1] * 1.5);
    let bath = build_bath(&spec, 600, span, 2.0).unwrap();
    assert!(bath.covers_drive_band);
    assert!((bath.horizon - 2.0 * std::f64::consts::PI / bath.spacing).abs() < 1e-12);
    // binned reconstruction: Σ c²/ω over a window / window width ≈ J
    let centre = 1.5;
    let width = 0.3;
    let sum: f64 = bath
        .modes
        .iter()
        .filter(|m| (m.omega - centre).abs() < 0.5 * width)
        .map(|m| m.coupling[0] * m.coupling[0] / m.omega)
        .sum();
    let j = spec.density.j(centre);
    assert!((sum / width - j).abs() < 0.02 * j, "{} vs {j}", sum / width);

    let free = ReservoirSpec { density: density(0.0, 1.5, &[1.0]), ..spec.clone() };
    assert!(build_bath(&free, 10, span, 2.0).unwrap().modes.iter().all(|m| m.coupling[0] == 0.0));
    assert!(!build_bath(&spec, 10, (0.01, 1.0), 2.0).unwrap().covers_drive_band);
    assert!(build_bath(&spec, 1, span, 2.0).is_err());
}

proptest! {
    #[test]
    fn occupations_decrease(t in 0.05f64..10.0, r in 0.0f64..1.5, w1 in 0.01f64..30.0, dw in 1e-3f64..10.0) {
        prop_assume!(w1 + dw < 30.0 * t);
        for o in [OccupationModel::Thermal { temperature: t }, OccupationModel::SqueezedThermal { temperature: t, r }] {
            prop_assert!(occupation(&o, w1 + dw).unwrap() < occupation(&o, w1).unwrap());
        }
    }

    #[test]
    fn coth_relation_holds(t in 0.05f64..10.0, r in 0.0f64..1.5, w in 0.01f64..30.0) {
        let o = OccupationModel::SqueezedThermal { temperature: t, r };
        let n = occupation(&o, w).unwrap();
        let big = characteristic_frequency(&o, w).unwrap();
        let lhs = 1.0 / (w / big).tanh();
        prop_assert!((lhs - (2.0 * n + 1.0)).abs() <= 1e-10 * (2.0 * n + 1.0));
    }

    #[test]
    fn thermal_ratios_are_temperature_ratios(ta in 0.05f64..10.0, tb in 0.05f64..10.0, w in 0.01f64..30.0, w2 in 0.01f64..30.0) {
        let a = characteristic_frequency(&OccupationModel::Thermal { temperature: ta }, w).unwrap();
        let b = characteristic_frequency(&OccupationModel::Thermal { temperature: tb }, w2).unwrap();
        prop_assert_eq!(a / b, ta / tb);
    }

    #[test]
    fn density_is_psd(gamma in 0.0f64..2.0, cutoff in 0.1f64..20.0, u0 in -1.0f64..1.0, u1 in -1.0f64..1.0, w in 0.0f64..100.0) {
        let d = density(gamma, cutoff, &[u0, u1]);
        let eig = spectral_density_value(&d, w).unwrap().symmetric_eigenvalues();
        prop_assert!(eig.min() >= -1e-15 * eig.max().abs().max(1.0));
    }
}
