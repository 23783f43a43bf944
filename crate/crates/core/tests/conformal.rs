use proptest::prelude::*;
use singext::conformal::{conformality_defect, Direction};
use singext::suite::{bump_map, constant_map, degree_map};
use singext::{gagliardo_energy, gap_potential, psi, psi_inv, ConformalMap, QuadratureSpec, SphereQuadrature, TailMode};

fn ball_point(v: [f64; 3], dim: usize) -> [f64; 3] {
    let mut x = [0.0; 3];
    x[..=dim].copy_from_slice(&v[..=dim]);
    x
}

fn norm2(x: &[f64; 3]) -> f64 {
    x.iter().map(|c| c * c).sum()
}

fn plane_quad() -> QuadratureSpec {
    QuadratureSpec::new(1024, 0.0, TailMode::AnalyticConstantTail).unwrap()
}

#[test]
fn energy_and_gap_survive_the_change_of_domain() {
    let sphere = SphereQuadrature::new(1, 4096).unwrap();
    for u in [degree_map(1, 1024).unwrap(), bump_map(0.5, 1024).unwrap()] {
        let plane = gagliardo_energy(&u, 2.0, &plane_quad()).unwrap();
        let round = sphere.energy(&u, 2.0).unwrap();
        assert!((plane - round).abs() <= 0.02 * plane, "energy {plane} vs {round}");
        let plane = gap_potential(&u, 0.125, &plane_quad()).unwrap();
        let round = sphere.gap(&u, 0.125).unwrap();
        assert!((plane - round).abs() <= 0.02 * plane, "gap {plane} vs {round}");
    }
}

#[test]
fn constant_map_stays_constant_on_the_sphere() {
    let u = constant_map(64).unwrap();
    let sphere = SphereQuadrature::new(1, 64).unwrap();
    assert_eq!(sphere.energy(&u, 2.0).unwrap(), 0.0);
}

#[test]
fn boundary_circle_lands_on_the_line() {
    for i in 0..100 {
        let a = 0.1 + 6.0 * i as f64 / 100.0;
        let y = psi(&[a.sin(), -a.cos(), 0.0], 1).unwrap();
        assert!(y[1].abs() < 1e-12, "{y:?}");
    }
    assert!(psi(&[0.0, -1.0, 0.0], 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn pole_identity(v in prop::array::uniform3(-1.0f64..1.0), dim in 1usize..=2) {
        let x = ball_point(v, dim);
        prop_assume!(norm2(&x) < 1.0);
        let y = psi(&x, dim).unwrap();
        let mut shifted = x;
        shifted[dim] += 1.0;
        let residual = y[dim] * norm2(&shifted) + 2.0 * norm2(&x) - 2.0;
        prop_assert!(residual.abs() < 1e-12);
        prop_assert!(y[dim] > 0.0);
    }

    #[test]
    fn round_trip(v in prop::array::uniform3(-1.0f64..1.0), dim in 1usize..=2) {
        let x = ball_point(v, dim);
        prop_assume!(norm2(&x) < 1.0);
        let back = psi_inv(&psi(&x, dim).unwrap(), dim).unwrap();
        for a in 0..=dim {
            prop_assert!((back[a] - x[a]).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobian_is_a_scaled_rotation(v in prop::array::uniform3(-1.0f64..1.0), dim in 1usize..=2) {
        let x = ball_point(v, dim);
        prop_assume!(norm2(&x) < 1.0);
        let map = ConformalMap::new(dim, Direction::BallToHalfSpace).unwrap();
        prop_assert!(conformality_defect(&map.jacobian(&x).unwrap(), dim) < 1e-6);
    }
}
