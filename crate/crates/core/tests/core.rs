use dashu_ratio::RBig;
use proptest::prelude::*;
use vopskit::index::{monomial_vector, negative_monomial_vector, poly_dim, shift_matrix, MultiIndex};
use vopskit::matrix::{dense_solve, Matrix};
use vopskit::{Backend, Scalar};

fn one_column(l: &Matrix, row: usize) -> usize {
    let hits: Vec<usize> = (0..l.cols()).filter(|&c| !l.get(row, c).is_zero()).collect();
    assert_eq!(hits.len(), 1);
    assert!(l.get(row, hits[0]).is_one());
    hits[0]
}

#[test]
fn dimension_counts() {
    assert_eq!([0, 2, 3].map(poly_dim), [1, 6, 10]);
}

#[test]
fn shift_rows_are_orthonormal() {
    for n in 0..=8 {
        for axis in [1, 2] {
            let l = shift_matrix(Backend::Exact, n, axis).unwrap();
            assert_eq!(l.mul(&l.transpose()).unwrap(), Matrix::identity(Backend::Exact, n + 1), "n={n} axis={axis}");
        }
    }
}

#[test]
fn shifts_realize_monomial_multiplication() {
    let unit = [MultiIndex::new(1, 0), MultiIndex::new(0, 1)];
    for n in 0..=6 {
        let (lo, hi) = (monomial_vector(n), monomial_vector(n + 1));
        for (axis, e) in [(1u8, unit[0]), (2, unit[1])] {
            let l = shift_matrix(Backend::Exact, n, axis).unwrap();
            for (u, m) in lo.iter().enumerate() {
                assert_eq!(*m + e, hi[one_column(&l, u)]);
            }
        }
        if n == 0 {
            continue;
        }
        let (neg, neg_next) = (negative_monomial_vector(n).unwrap(), negative_monomial_vector(n + 1).unwrap());
        // x_i^{-1} X_{-n} = L_{n,j} X_{-(n+1)} with j the other axis
        for (other, e) in [(2u8, MultiIndex::new(-1, 0)), (1, MultiIndex::new(0, -1))] {
            let l = shift_matrix(Backend::Exact, n, other).unwrap();
            for (u, m) in neg.iter().enumerate() {
                assert_eq!(*m + e, neg_next[one_column(&l, u)]);
            }
        }
    }
}

fn rational() -> impl Strategy<Value = RBig> {
    (-1000i64..1000, 1i64..200).prop_map(|(n, d)| RBig::from_parts_signed(n.into(), (d as u64).into()))
}

fn matrix_entries(n: usize) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-9i64..10, n * n)
}

proptest! {
    #[test]
    fn exact_field_laws(a in rational(), b in rational(), c in rational(), pa in -3i32..4, pb in -3i32..4) {
        let (x, y, z) = (Scalar::exact(a.clone(), 1), Scalar::exact(b.clone(), 1), Scalar::exact(c.clone(), 1));
        prop_assert_eq!(x.add(&y).unwrap().add(&z).unwrap(), x.add(&y.add(&z).unwrap()).unwrap());
        let lhs = x.mul(&y.add(&z).unwrap()).unwrap();
        prop_assert_eq!(lhs, x.mul(&y).unwrap().add(&x.mul(&z).unwrap()).unwrap());
        let prod = Scalar::exact(a.clone(), pa).mul(&Scalar::exact(b.clone(), pb)).unwrap();
        if !prod.is_zero() {
            prop_assert_eq!(prod.pi_exp(), pa + pb);
        }
        prop_assert_eq!(prod.to_rational(), a * b);
    }

    #[test]
    fn exact_solve_residual_is_zero(n in 1usize..6, vals in matrix_entries(6), rhs in prop::collection::vec(-20i64..20, 12)) {
        let m = Matrix::from_fn(Backend::Exact, n, n, |r, c| {
            Ok(Backend::Exact.ratio(vals[r * 6 + c] + if r == c { 60 } else { 0 }, 1 + c as i64))
        }).unwrap();
        let b = Matrix::from_fn(Backend::Exact, n, 2, |r, c| Ok(Backend::Exact.ratio(rhs[r * 2 + c], 7))).unwrap();
        let x = dense_solve(&m, &b).unwrap();
        prop_assert!(m.mul(&x).unwrap().sub(&b).unwrap().is_zero());
    }

    #[test]
    fn float_solve_residual_bound(n in 1usize..6, vals in matrix_entries(6), rhs in prop::collection::vec(-20i64..20, 12)) {
        let be = Backend::float(50).unwrap();
        let m = Matrix::from_fn(be, n, n, |r, c| Ok(be.ratio(vals[r * 6 + c] + if r == c { 30 } else { 0 }, 3))).unwrap();
        let b = Matrix::from_fn(be, n, 2, |r, c| Ok(be.ratio(rhs[r * 2 + c], 7))).unwrap();
        let x = dense_solve(&m, &b).unwrap();
        let res = m.mul(&x).unwrap().sub(&b).unwrap().norm1().unwrap().to_f64();
        let bound = 1e-38 * m.norm1().unwrap().to_f64() * x.norm1().unwrap().to_f64();
        prop_assert!(res <= bound, "{} > {}", res, bound);
    }
}
