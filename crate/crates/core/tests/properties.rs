use proptest::prelude::*;

use qps::density::{evolve_lvn, DensityMatrix};
use qps::fock::TruncatedBasis;
use qps::joint::{GaugeChoice, JointStateSpec};
use qps::metric::{build_shape, decompose_covariance, raise_lower, reduced_covariant_block, saturating_p, Signature, StatMoments};
use qps::numerics::{max_abs_c, to_complex, CMat, RMat};
use qps::C64;

fn signature() -> impl Strategy<Value = Signature> {
    (1usize..=2).prop_flat_map(|d| (0..=d).prop_map(move |plus| Signature::new(plus, d - plus).unwrap()))
}

/// Random saturating moments with `ϱX⁻¹` symmetric.
fn saturating(sig: Signature, hbar: f64, seed: &[f64]) -> StatMoments {
    let d = sig.dim();
    let l = RMat::from_fn(d, d, |i, j| if j <= i { seed[i * 2 + j] } else { 0.0 });
    let x = &l * l.transpose() + RMat::identity(d, d) * 0.2;
    let s = RMat::from_fn(d, d, |i, j| seed[4 + i + j]);
    let rho = &s * &x;
    let p = saturating_p(&x, &rho, &sig.metric(), hbar).unwrap();
    let p = (&p + p.transpose()) * 0.5;
    StatMoments { mean_p: seed[7..7 + d].to_vec(), mean_x: seed[9..9 + d].to_vec(), p, x, rho }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn raise_lower_is_an_involution(sig in signature(), v in prop::collection::vec(-1e3f64..1e3, 2)) {
        let m = sig.metric();
        let v = &v[..sig.dim()];
        let twice = raise_lower(&raise_lower(v, &m).unwrap(), &m).unwrap();
        prop_assert_eq!(twice, v.to_vec());
    }

    #[test]
    fn decomposition_reconstructs(
        sig in signature(),
        hbar in 0.5f64..2.0,
        seed in prop::collection::vec(-0.8f64..0.8, 11),
    ) {
        let m = saturating(sig, hbar, &seed);
        let metric = sig.metric();
        let target = to_complex(&reduced_covariant_block(&m, &metric, hbar));
        match decompose_covariance(&m, &metric, hbar) {
            Ok(f) => {
                let err = (f.reconstruct(&metric) - &target).norm();
                prop_assert!(err < 1e-10 * (1.0 + target.norm()), "reconstruction error {err:e}");
                prop_assert!(f.constraint_residual(&metric) < 1e-9);
            }
            Err(e) => {
                // Only off-diagonal coordinate coupling across opposite signatures is refused.
                let mixed = sig.d_plus > 0 && sig.d_minus > 0 && m.x[(0, 1)].abs() > 0.0;
                prop_assert!(mixed, "unexpected refusal: {e}");
            }
        }
    }

    #[test]
    fn shape_matches_reduced_form(sig in signature(), hbar in 0.5f64..2.0, seed in prop::collection::vec(-0.8f64..0.8, 11)) {
        let m = saturating(sig, hbar, &seed);
        let shape = build_shape(&m, &sig.metric(), hbar).unwrap();
        let xi = m.x.clone().try_inverse().unwrap();
        let want = (to_complex(&RMat::identity(sig.dim(), sig.dim())) * C64::new(hbar * hbar, 0.0)
            - to_complex(&m.rho) * C64::new(0.0, 2.0 * hbar)) * to_complex(&xi) * C64::new(0.25, 0.0);
        prop_assert!(max_abs_c(&(shape.b - want)) < 1e-10 * (1.0 + hbar * hbar * xi.amax()));
    }

    #[test]
    fn lvn_is_unitary(seed in prop::collection::vec(-1.0f64..1.0, 32), t in -10.0f64..10.0) {
        let basis = TruncatedBasis::new(vec![4], JointStateSpec::ground(1, 1.0).unwrap()).unwrap();
        let a = CMat::from_fn(4, 4, |i, j| C64::new(seed[i * 4 + j], seed[16 + i * 4 + j]));
        let pos = &a * a.adjoint();
        let rho = DensityMatrix::new(basis.clone(), &pos / pos.trace()).unwrap();
        let h = CMat::from_fn(4, 4, |i, j| C64::new(seed[i + j], seed[16 + i] - seed[16 + j]));
        let out = evolve_lvn(&rho, &h, t).unwrap();
        prop_assert!((out.purity() - rho.purity()).abs() < 1e-10);
        prop_assert!((out.trace() - 1.0).abs() < 1e-10);
        for (x, y) in out.eigenvalues().iter().zip(rho.eigenvalues()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn gauge_text_round_trip(c in -1e6f64..1e6, pick in 0usize..4) {
        let g = [GaugeChoice::Zero, GaugeChoice::Full, GaugeChoice::Half, GaugeChoice::Const(c)][pick];
        prop_assert_eq!(g.to_string().parse::<GaugeChoice>().unwrap(), g);
    }

    #[test]
    fn grid_spec_parser_total(s in ".{0,40}") {
        let _ = qps::io::parse_grid_spec(&s);
        let _ = qps::io::parse_pgrid_spec(&s, 1.0);
        let _ = qps::io::parse_tol(&s);
    }

    #[test]
    fn joint_states_from_random_blocks_are_valid(sig in signature(), hbar in 0.5f64..2.0, seed in prop::collection::vec(-0.8f64..0.8, 11)) {
        let m = saturating(sig, hbar, &seed);
        let spec = JointStateSpec::new(m, sig, GaugeChoice::Half, hbar).unwrap();
        prop_assert!(spec.normalization().is_finite());
    }
}
