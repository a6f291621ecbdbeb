//! Hex8 meshes: storage, validation, JSON schema and structured generators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::shape::{gauss_points, shape_eval};
use crate::kinematics::Tensor2;
use crate::{Real, Vec3};

/// Reference-configuration mesh of 8-node hexahedra. Node and face sets are
/// ordered maps so iteration is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    /// Reference coordinates, mm.
    pub nodes: Vec<[Real; 3]>,
    /// Zero-based connectivity.
    pub hex8: Vec<[usize; 8]>,
    #[serde(default)]
    pub node_sets: BTreeMap<String, Vec<usize>>,
    /// (element index, local face 0..5).
    #[serde(default)]
    pub face_sets: BTreeMap<String, Vec<(usize, usize)>>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.hex8.len()
    }

    pub fn node(&self, i: usize) -> Vec3 {
        Vec3(self.nodes[i])
    }

    /// Checks index ranges and positivity of the isoparametric Jacobian at
    /// every quadrature point; degenerate elements are rejected early.
    pub fn validate(&self) -> Result<()> {
        for (e, conn) in self.hex8.iter().enumerate() {
            for &n in conn {
                if n >= self.nodes.len() {
                    return Err(Error::Mesh(format!(
                        "element {e} references node {n} out of range"
                    )));
                }
            }
            for xi in gauss_points() {
                let (_, dn) = shape_eval(xi);
                let mut jac = Tensor2::zero();
                for a in 0..8 {
                    let x = self.nodes[conn[a]];
                    for i in 0..3 {
                        for k in 0..3 {
                            jac.0[i][k] += x[i] * dn[a][k];
                        }
                    }
                }
                let det = jac.det();
                if !(det > 0.0) {
                    return Err(Error::Mesh(format!(
                        "element {e}: non-positive Jacobian {det:.3e}"
                    )));
                }
            }
        }
        for (name, set) in &self.node_sets {
            if set.iter().any(|&n| n >= self.nodes.len()) {
                return Err(Error::Mesh(format!("node set '{name}' out of range")));
            }
        }
        for (name, set) in &self.face_sets {
            if set.iter().any(|&(e, f)| e >= self.hex8.len() || f >= 6) {
                return Err(Error::Mesh(format!("face set '{name}' out of range")));
            }
        }
        Ok(())
    }
}

/// Structured box grid `nx × ny × nz` of cell size `(dx, dy, dz)` with the
/// canonical boundary sets (`xmin`, `xmax`, ..., `all`). Cells whose index
/// triple satisfies `mask` are omitted (holes, notches).
pub fn box_grid(
    nx: usize,
    ny: usize,
    nz: usize,
    dx: Real,
    dy: Real,
    dz: Real,
    mask: impl Fn(usize, usize, usize) -> bool,
) -> Mesh {
    let node_id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as Real * dx, j as Real * dy, k as Real * dz]);
            }
        }
    }
    let mut hex8 = Vec::new();
    let mut used = vec![false; nodes.len()];
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if mask(i, j, k) {
                    continue;
                }
                let conn = [
                    node_id(i, j, k),
                    node_id(i + 1, j, k),
                    node_id(i + 1, j + 1, k),
                    node_id(i, j + 1, k),
                    node_id(i, j, k + 1),
                    node_id(i + 1, j, k + 1),
                    node_id(i + 1, j + 1, k + 1),
                    node_id(i, j + 1, k + 1),
                ];
                for &n in &conn {
                    used[n] = true;
                }
                hex8.push(conn);
            }
        }
    }
    // Compact node numbering over used nodes only.
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut compact = Vec::new();
    for (old, &u) in used.iter().enumerate() {
        if u {
            remap[old] = compact.len();
            compact.push(nodes[old]);
        }
    }
    for conn in hex8.iter_mut() {
        for n in conn.iter_mut() {
            *n = remap[*n];
        }
    }

    let lx = nx as Real * dx;
    let ly = ny as Real * dy;
    let lz = nz as Real * dz;
    let eps = 1e-9 * dx.min(dy).min(dz).max(1e-12);
    let mut node_sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, x) in compact.iter().enumerate() {
        let mut tag = |name: &str| node_sets.entry(name.to_string()).or_default().push(i);
        if x[0].abs() < eps {
            tag("xmin");
        }
        if (x[0] - lx).abs() < eps {
            tag("xmax");
        }
        if x[1].abs() < eps {
            tag("ymin");
        }
        if (x[1] - ly).abs() < eps {
            tag("ymax");
        }
        if x[2].abs() < eps {
            tag("zmin");
        }
        if (x[2] - lz).abs() < eps {
            tag("zmax");
        }
        tag("all");
    }

    // Boundary face sets on the box hull (per coordinate plane).
    let mut face_sets: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    let mesh_probe = Mesh {
        nodes: compact.clone(),
        hex8: hex8.clone(),
        node_sets: BTreeMap::new(),
        face_sets: BTreeMap::new(),
    };
    for (e, conn) in mesh_probe.hex8.iter().enumerate() {
        for (face, face_nodes) in crate::fem::shape::FACES.iter().enumerate() {
            let on = |pred: &dyn Fn(&[Real; 3]) -> bool| {
                face_nodes
                    .iter()
                    .all(|&a| pred(&mesh_probe.nodes[conn[a]]))
            };
            if on(&|x| x[0].abs() < eps) {
                face_sets.entry("xmin".into()).or_default().push((e, face));
            }
            if on(&|x| (x[0] - lx).abs() < eps) {
                face_sets.entry("xmax".into()).or_default().push((e, face));
            }
            if on(&|x| x[1].abs() < eps) {
                face_sets.entry("ymin".into()).or_default().push((e, face));
            }
            if on(&|x| (x[1] - ly).abs() < eps) {
                face_sets.entry("ymax".into()).or_default().push((e, face));
            }
            if on(&|x| x[2].abs() < eps) {
                face_sets.entry("zmin".into()).or_default().push((e, face));
            }
            if on(&|x| (x[2] - lz).abs() < eps) {
                face_sets.entry("zmax".into()).or_default().push((e, face));
            }
        }
    }

    Mesh {
        nodes: compact,
        hex8,
        node_sets,
        face_sets,
    }
}

/// Plate `nx × ny × nz` with a rectangular through-hole (index ranges).
pub fn plate_with_hole(
    nx: usize,
    ny: usize,
    nz: usize,
    dx: Real,
    dy: Real,
    dz: Real,
    hole_x: (usize, usize),
    hole_y: (usize, usize),
) -> Mesh {
    box_grid(nx, ny, nz, dx, dy, dz, |i, j, _k| {
        i >= hole_x.0 && i < hole_x.1 && j >= hole_y.0 && j < hole_y.1
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_grid_counts_and_sets() {
        let m = box_grid(4, 2, 1, 0.25, 0.5, 1.0, |_, _, _| false);
        assert_eq!(m.n_elements(), 8);
        assert_eq!(m.n_nodes(), 5 * 3 * 2);
        m.validate().unwrap();
        assert_eq!(m.node_sets["xmin"].len(), 6);
        assert_eq!(m.node_sets["xmax"].len(), 6);
        assert_eq!(m.node_sets["all"].len(), m.n_nodes());
        assert_eq!(m.face_sets["xmin"].len(), 2);
        assert_eq!(m.face_sets["zmax"].len(), 8);
    }

    #[test]
    fn hole_removes_cells_and_compacts_nodes() {
        let m = plate_with_hole(4, 4, 1, 1.0, 1.0, 1.0, (1, 3), (1, 3));
        assert_eq!(m.n_elements(), 16 - 4);
        m.validate().unwrap();
        // Interior hole corner nodes survive (they belong to rim elements).
        assert!(m.nodes.iter().all(|x| x.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn inverted_element_rejected() {
        let mut m = box_grid(1, 1, 1, 1.0, 1.0, 1.0, |_, _, _| false);
        m.hex8[0].swap(0, 1);
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = box_grid(2, 1, 1, 0.5, 1.0, 1.0, |_, _, _| false);
        let text = serde_json::to_string(&m).unwrap();
        let back: Mesh = serde_json::from_str(&text).unwrap();
        assert_eq!(m.nodes, back.nodes);
        assert_eq!(m.hex8, back.hex8);
        assert_eq!(m.node_sets, back.node_sets);
    }
}
