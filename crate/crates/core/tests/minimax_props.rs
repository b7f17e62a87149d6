use std::collections::HashSet;

use proptest::prelude::*;
use simplex_pac::metrics::{kl_noisy_mc, tv_uniform};
use simplex_pac::minimax::{
    altitude, assouad_family, lecam_tv_floor, fano_family, kl_shift_bound, lecam_pair, psi, standard_translate_tv,
    AssouadMode, BitCode, Construction,
};
use simplex_pac::rng::Stream;
use simplex_pac::{NoisyModel, Simplex};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fano_geometry_holds(k in 1usize..=3, zeta in 0.05f64..0.5, m in 2usize..5, seed in 0u64..100) {
        let fam = fano_family(k, zeta, m, seed).unwrap();
        prop_assert_eq!(fam.construction, Construction::FanoTranslate);
        let t = fam.shifts.unwrap();
        let kf = k as f64;
        for a in 0..m {
            let expect = Simplex::standard(k).translate(&t[a]);
            prop_assert_eq!(&fam.members[a], &expect);
            for b in a + 1..m {
                let d = dist(&t[a], &t[b]);
                prop_assert!(d >= zeta / (2.0 * kf) && d <= 2.0 * zeta / kf);
                let diff: Vec<f64> = t[a].iter().zip(&t[b]).map(|(x, y)| x - y).collect();
                prop_assert!(standard_translate_tv(&diff) >= zeta / 2.0);
            }
        }
    }

    #[test]
    fn translate_tv_is_symmetric(d in prop::collection::vec(-0.3f64..0.3, 1..=4)) {
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        prop_assert!((standard_translate_tv(&d) - standard_translate_tv(&neg)).abs() < 1e-12);
    }
}

#[test]
fn tv_mode_family_size_is_power_of_two() {
    for k in 1..=6 {
        let fam = assouad_family(k, 0.05, AssouadMode::Tv).unwrap();
        assert_eq!(fam.len(), 1 << k);
        let codes: HashSet<_> = fam.codes.unwrap().into_iter().collect();
        assert_eq!(codes.len(), 1 << k);
    }
}

#[test]
fn vertex_l1_decode_is_injective() {
    let dec = BitCode {
        k: 4,
        zeta: 0.1,
        mode: AssouadMode::VertexL1,
    };
    let mut rng = Stream::new(17);
    for _ in 0..1000 {
        let a = dec.random_code(&mut rng);
        let b = dec.random_code(&mut rng);
        let (sa, sb) = (dec.decode(&a).unwrap(), dec.decode(&b).unwrap());
        assert_eq!(a == b, sa == sb);
    }
}

#[test]
fn psi_round_trip() {
    let dec = BitCode {
        k: 3,
        zeta: 0.1,
        mode: AssouadMode::VertexL1,
    };
    let mut rng = Stream::new(3);
    for _ in 0..100 {
        let c = dec.random_code(&mut rng);
        let s = dec.decode(&c).unwrap();
        let full = psi(&s);
        assert_eq!(full.len(), 9);
        assert_eq!(dec.encode(&s).unwrap(), c);
    }
}

#[test]
fn lecam_bound_below_monte_carlo_tv() {
    for s in [
        Simplex::standard(2),
        Simplex::new(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.3, 0.7]]).unwrap(),
        Simplex::standard(3),
    ] {
        let fam = lecam_pair(&s, 0.03).unwrap();
        let tv = tv_uniform(&fam.members[0], &fam.members[1], 200_000, 8).unwrap();
        let h = altitude(&s);
        let floor = lecam_tv_floor(s.dim(), 0.03, h);
        assert!(tv.value >= floor - 3.0 * tv.std_error, "{} < {floor}", tv.value);
        let first_order = fam.tv_lower_bound.unwrap();
        assert!((first_order - s.dim() as f64 * 0.03 / h).abs() < 1e-12);
        assert!(floor <= first_order);
    }
}

#[test]
fn kl_below_shift_bound() {
    let s = Simplex::standard(2);
    let b = [0.1, -0.05];
    let sigma = 0.2;
    let kl = kl_noisy_mc(
        &NoisyModel::new(s.clone(), sigma).unwrap(),
        &NoisyModel::new(s.translate(&b), sigma).unwrap(),
        4000,
        1000,
        6,
    )
    .unwrap();
    assert!(kl.value <= kl_shift_bound(&b, sigma) + 3.0 * kl.std_error);
    assert!(kl.value > 0.0);
}
