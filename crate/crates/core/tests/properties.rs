mod common;

use common::*;
use disco::comm::{Cluster, Scheduler};
use disco::harness::{dense_gradient, dense_hessian, gen_synthetic};
use disco::linalg::{DenseVec, PartitionedVec};
use disco::loss::{Loss, LossKind, Objective};
use disco::partition::{partition_by_features, partition_by_samples};
use disco::solver::{
    hessian_vec_features, hessian_vec_samples, FeatureLayout, SampleLayout, SolverConfig,
};
use nalgebra::DVector;
use proptest::prelude::*;

fn loss_kind() -> impl Strategy<Value = LossKind> {
    prop_oneof![Just(LossKind::Square), Just(LossKind::Logistic)]
}

fn labels_for(kind: LossKind, y: &mut DenseVec) {
    if kind == LossKind::Logistic {
        for v in y.iter_mut() {
            *v = if *v >= 0.0 { 1.0 } else { -1.0 };
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Both layouts compute the same gradient and Hessian products as the
    /// dense formulas, for any shape and node count.
    #[test]
    fn layouts_agree_with_dense_derivatives(
        d in 1usize..25,
        n in 1usize..40,
        m in 1usize..5,
        density in 0.1f64..1.0,
        seed in any::<u64>(),
        kind in loss_kind(),
    ) {
        prop_assume!(m <= d && m <= n);
        let mut data = gen_synthetic(d, n, density, 0.5, seed).unwrap().dataset;
        labels_for(kind, &mut data.y);
        let cfg = SolverConfig { lambda: 0.05, loss: Loss::new(kind), ..Default::default() };
        let obj = Objective::new(cfg.loss, cfg.lambda, n, d).unwrap();
        let w = random_w(d, seed ^ 1);
        let u = random_w(d, seed ^ 2);
        let g = dense_gradient(&data, &cfg, &w).unwrap();
        let hu = dense_hessian(&data, &cfg, &w).unwrap() * DVector::from_column_slice(u.as_slice());

        let sp = partition_by_samples(&data.x, &data.y, m).unwrap();
        let mut c = Cluster::new(m, Scheduler::Sequential).unwrap();
        let sl = SampleLayout::evaluate(&mut c, &sp, obj, &w).unwrap();
        let shu = hessian_vec_samples(&mut c, &sl, &u).unwrap();
        prop_assert!(rel_err(sl.gradient(), g.as_slice()) <= 1e-12);
        prop_assert!(rel_err(&shu, hu.as_slice()) <= 1e-12);

        let fp = partition_by_features(&data.x, &data.y, m).unwrap();
        let sizes = fp.sizes();
        let wb = PartitionedVec::split(&w, &sizes).unwrap().blocks().to_vec();
        let ub = PartitionedVec::split(&u, &sizes).unwrap().blocks().to_vec();
        let mut c = Cluster::new(m, Scheduler::Parallel).unwrap();
        let fl = FeatureLayout::evaluate(&mut c, &fp, obj, &wb).unwrap();
        let fg: Vec<f64> = (0..m).flat_map(|i| fl.gradient_block(i).as_slice().to_vec()).collect();
        let fhu: Vec<f64> = hessian_vec_features(&mut c, &fl, &ub).unwrap().into_iter().flat_map(|b| b.into_vec()).collect();
        prop_assert!(rel_err(&fg, g.as_slice()) <= 1e-12);
        prop_assert!(rel_err(&fhu, hu.as_slice()) <= 1e-12);
        // Replicated margins equal Xᵀw.
        let full = obj.full_gradient(&data.x, &data.y, &w).unwrap();
        prop_assert!(rel_err(&full, g.as_slice()) <= 1e-12);
    }

    /// Every inner solve meets its residual target against the true Hessian
    /// and reports `δ² = vᵀHv`.
    #[test]
    fn inner_solves_carry_valid_certificates(
        seed in any::<u64>(),
        m in 1usize..4,
        theta in 1e-8f64..1e-1,
        kind in loss_kind(),
    ) {
        let (d, n) = (12, 60);
        let mut data = gen_synthetic(d, n, 0.5, 0.3, seed).unwrap().dataset;
        labels_for(kind, &mut data.y);
        let inst = Instance {
            data,
            m,
            config: SolverConfig { lambda: 0.05, mu: 0.05, tau: n / m, loss: Loss::new(kind), ..Default::default() },
        };
        let w = random_w(d, seed);
        let h = dense_hessian(&inst.data, &inst.config, &w).unwrap();
        let g = dense_gradient(&inst.data, &inst.config, &w).unwrap();
        let eps = theta * g.norm();
        for (step, _, _) in [samples_direction(&inst, &w, eps), features_direction(&inst, &w, eps)] {
            let v = DVector::from_column_slice(step.v.as_slice());
            let res = (&h * &v - &g).norm();
            prop_assert!(res <= eps * (1.0 + 1e-6) + 1e-13, "{res} > {eps}");
            let vhv = v.dot(&(&h * &v));
            prop_assert!(scalar_rel_err(step.delta * step.delta, vhv) <= 1e-8);
        }
    }
}
