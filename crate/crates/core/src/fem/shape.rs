//! Trilinear hex8 shape functions, Gauss quadrature and face parametrization.

use crate::Real;

/// Natural coordinates of the 8 nodes.
pub const XI: [[Real; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local node quadruples of the six faces
/// (ξ=−1, ξ=+1, η=−1, η=+1, ζ=−1, ζ=+1).
pub const FACES: [[usize; 4]; 6] = [
    [0, 4, 7, 3],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [2, 3, 7, 6],
    [0, 3, 2, 1],
    [4, 5, 6, 7],
];

/// Shape functions and their natural-coordinate derivatives at ξ.
pub fn shape_eval(xi: [Real; 3]) -> ([Real; 8], [[Real; 3]; 8]) {
    let mut n = [0.0; 8];
    let mut dn = [[0.0; 3]; 8];
    for a in 0..8 {
        let [xa, ya, za] = XI[a];
        let (fx, fy, fz) = (
            1.0 + xa * xi[0],
            1.0 + ya * xi[1],
            1.0 + za * xi[2],
        );
        n[a] = 0.125 * fx * fy * fz;
        dn[a] = [
            0.125 * xa * fy * fz,
            0.125 * fx * ya * fz,
            0.125 * fx * fy * za,
        ];
    }
    (n, dn)
}

const G: Real = 0.577_350_269_189_625_8; // 1/√3

/// 2×2×2 Gauss points (weight 1 each).
pub fn gauss_points() -> [[Real; 3]; 8] {
    let mut pts = [[0.0; 3]; 8];
    let mut k = 0;
    for &z in &[-G, G] {
        for &y in &[-G, G] {
            for &x in &[-G, G] {
                pts[k] = [x, y, z];
                k += 1;
            }
        }
    }
    pts
}

/// 2×2 Gauss points on a face of the reference cube, mapped into the volume
/// coordinates, together with the two in-plane natural directions.
pub fn face_gauss_points(face: usize) -> ([[Real; 3]; 4], [usize; 2]) {
    // In-plane natural axes per face (the fixed axis is the remaining one).
    let (fixed_axis, fixed_val, axes) = match face {
        0 => (0, -1.0, [1, 2]),
        1 => (0, 1.0, [1, 2]),
        2 => (1, -1.0, [0, 2]),
        3 => (1, 1.0, [0, 2]),
        4 => (2, -1.0, [0, 1]),
        5 => (2, 1.0, [0, 1]),
        _ => panic!("hex8 face index out of range"),
    };
    let mut pts = [[0.0; 3]; 4];
    let mut k = 0;
    for &b in &[-G, G] {
        for &a in &[-G, G] {
            let mut xi = [0.0; 3];
            xi[fixed_axis] = fixed_val;
            xi[axes[0]] = a;
            xi[axes[1]] = b;
            pts[k] = xi;
            k += 1;
        }
    }
    (pts, axes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_property() {
        for a in 0..8 {
            let (n, _) = shape_eval(XI[a]);
            for b in 0..8 {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((n[b] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn center_symmetry() {
        let (n, _) = shape_eval([0.0, 0.0, 0.0]);
        for a in 0..8 {
            assert!((n[a] - 0.125).abs() < 1e-16);
        }
    }

    #[test]
    fn partition_of_unity_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        for _ in 0..100 {
            let xi = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let (n, dn) = shape_eval(xi);
            let sum: Real = n.iter().sum();
            assert!((sum - 1.0).abs() < 1e-14);
            for k in 0..3 {
                let dsum: Real = dn.iter().map(|d| d[k]).sum();
                assert!(dsum.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quadrature_integrates_trilinear_exactly() {
        // ∫ over [-1,1]³ of (1 + x)(1 - y)(1 + z) = 8.
        let mut total = 0.0;
        for p in gauss_points() {
            total += (1.0 + p[0]) * (1.0 - p[1]) * (1.0 + p[2]);
        }
        assert!((total - 8.0).abs() < 1e-13);
        // Quintic polynomial x²y²z² integrates exactly too (Gauss-2 is exact
        // through cubic per axis).
        let mut total = 0.0;
        for p in gauss_points() {
            total += p[0] * p[0] * p[1] * p[1] * p[2] * p[2];
        }
        assert!((total - 8.0 / 27.0).abs() < 1e-14);
    }

    #[test]
    fn face_points_lie_on_faces() {
        for face in 0..6 {
            let (pts, axes) = face_gauss_points(face);
            let fixed = 3 - axes[0] - axes[1];
            for p in pts {
                assert_eq!(p[fixed].abs(), 1.0);
            }
        }
    }
}
