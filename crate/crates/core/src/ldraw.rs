//! LDraw (`.ldr`) export.
//!
//! One stud is 20 LDU along x and z, one brick height is 24 LDU, and LDraw's
//! y axis points down, so layer `z` maps to `y = -24 z`. Brick anchors map
//! directly to part origins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{resolve_placements, check_validity, GeometryError, LegoGraph, Orientation};

pub const STUD_LDU: i32 = 20;
pub const BRICK_HEIGHT_LDU: i32 = 24;
pub const BRICK_PART: &str = "3001.dat";

const IDENTITY: &str = "1 0 0 0 1 0 0 0 1";
const QUARTER_TURN_Y: &str = "0 0 -1 0 1 0 1 0 0";

/// Solid colours from the standard LDraw palette used for random colouring.
const PALETTE: [u32; 10] = [1, 2, 4, 5, 14, 15, 19, 25, 27, 71];

#[derive(Debug, Clone)]
pub enum BrickColors {
    PerNode(Vec<u32>),
    Random { seed: u64 },
}

/// Renders a valid graph as LDraw text.
pub fn to_ldraw(g: &LegoGraph, colors: &BrickColors) -> Result<String, GeometryError> {
    let report = check_validity(g);
    if !report.valid {
        return Err(GeometryError::Invalid(report));
    }
    let resolved = resolve_placements(g)?;
    let palette: Vec<u32> = match colors {
        BrickColors::PerNode(c) => (0..g.node_count()).map(|i| c.get(i).copied().unwrap_or(16)).collect(),
        BrickColors::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..g.node_count()).map(|_| PALETTE[rng.gen_range(0..PALETTE.len())]).collect()
        }
    };
    let mut out = String::from("0 legogen structure\n");
    for (p, color) in resolved.placements.iter().zip(palette) {
        let matrix = match p.orientation {
            Orientation::AlongX => IDENTITY,
            Orientation::AlongY => QUARTER_TURN_Y,
        };
        out.push_str(&format!(
            "1 {color} {} {} {} {matrix} {BRICK_PART}\n",
            p.x * STUD_LDU,
            -p.z * BRICK_HEIGHT_LDU,
            p.y * STUD_LDU
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EdgeLabel;

    #[test]
    fn single_brick_line() {
        let mut g = LegoGraph::new();
        g.add_node(Orientation::AlongX);
        let text = to_ldraw(&g, &BrickColors::PerNode(vec![4])).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("1 ")).collect();
        assert_eq!(lines, vec!["1 4 0 0 0 1 0 0 0 1 0 0 0 1 3001.dat"]);
    }

    #[test]
    fn stacked_brick_is_one_height_up() {
        let mut g = LegoGraph::new();
        g.add_node(Orientation::AlongX);
        g.add_node(Orientation::AlongY);
        g.add_edge(0, 1, EdgeLabel::new(1, -1).unwrap()).unwrap();
        let text = to_ldraw(&g, &BrickColors::Random { seed: 3 }).unwrap();
        let second = text.lines().filter(|l| l.starts_with("1 ")).nth(1).unwrap();
        let fields: Vec<&str> = second.split_whitespace().collect();
        assert_eq!(&fields[2..5], &["20", "-24", "-20"]);
        assert_eq!(fields[5..14].join(" "), QUARTER_TURN_Y);
    }

    #[test]
    fn invalid_graph_rejected() {
        let mut g = LegoGraph::new();
        g.add_node(Orientation::AlongX);
        g.add_node(Orientation::AlongX);
        assert!(to_ldraw(&g, &BrickColors::Random { seed: 0 }).is_err());
    }
}
