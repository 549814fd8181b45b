//! Generates a random deployment map and compiles it into one single-robot
//! decision model per target, reporting the sizes involved.
//!
//! The map is a random connected graph with per-edge traversal-time windows;
//! compiling a target turns every (edge direction, speed level) into an
//! action whose failure probability comes from the edge's safety curve.
//!
//! Run with: cargo run --example generate_and_compile_map

use rcmdp::cmdp::check_transience;
use rcmdp::deployment::{build_single_robot_rcmdp, generate_map, MapGenConfig};

fn main() {
    let cfg = MapGenConfig {
        vertices: 16,
        extra_edges: 8,
        targets: 3,
        speed_levels: 6,
        seed: 42,
        ..MapGenConfig::default()
    };
    let map = generate_map(&cfg).expect("map generates");

    println!(
        "map: {} vertices, {} edges, start {}, targets {:?}, speed step {:.3}",
        map.vertices.len(),
        map.edges.len(),
        map.start,
        map.targets,
        map.delta
    );
    let windows: Vec<String> = map
        .edges
        .iter()
        .take(5)
        .map(|e| format!("{}-{} [{:.1}, {:.1}]", e.u, e.v, e.t_min, e.t_max))
        .collect();
    println!("first edges: {}", windows.join(", "));
    println!();

    println!("target  states  actions  transient");
    for &target in &map.targets {
        let built = build_single_robot_rcmdp(&map, target).expect("compile");
        println!(
            "{target:>6}  {:>6}  {:>7}  {}",
            built.model.num_states(),
            built.model.num_pairs(),
            check_transience(&built.model)
        );
    }
    println!();
    println!("Every policy eventually absorbs (the sink or the target), so the");
    println!("occupation-measure linear program is well posed for each target.");
}
