use std::collections::BTreeSet;

use nearwall_core::binning::{fill_bins, BinningOptions};
use nearwall_core::distance::exact_point_triangle_distance;
use nearwall_core::forest::RefineMark;
use nearwall_core::geometry::index_to_coords;
use nearwall_core::geometry::{generate_circle, generate_sphere};
use nearwall_core::nearwall::{
    build_cell_face_links, mark_near_wall_binned, mark_near_wall_naive, propagate_marks,
    propagate_rounds, refine_near_wall, Strategy, DEFAULT_LINK_CAPACITY,
};
use nearwall_core::{
    Aabb, Backend, BinFraction, BinGrid, BlockId, CoordListGeometry, Dim, Forest, NearWallRadius,
    Point, RefineParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn radius(d: f32) -> NearWallRadius {
    NearWallRadius::new(d).unwrap()
}

fn circle(n: usize) -> CoordListGeometry {
    index_to_coords(&generate_circle(Point::new2(0.5, 0.5), 0.25, n).unwrap()).unwrap()
}

fn sphere(n_lat: usize, n_lon: usize) -> CoordListGeometry {
    index_to_coords(&generate_sphere(Point::new3(0.5, 0.5, 0.5), 0.3, n_lat, n_lon).unwrap())
        .unwrap()
}

fn seg_dist(x: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab: Vec<f64> = (0..3).map(|i| b[i] - a[i]).collect();
    let ax: Vec<f64> = (0..3).map(|i| x[i] - a[i]).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = (ax.iter().zip(&ab).map(|(p, q)| p * q).sum::<f64>() / len2).clamp(0.0, 1.0);
    (0..3)
        .map(|i| (ax[i] - t * ab[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn face_dist(g: &CoordListGeometry, f: usize, x: Point) -> f64 {
    let [a, b, c] = g.face(f);
    match g.dim() {
        Dim::Two => seg_dist(x.to_f64(), a.to_f64(), b.to_f64()),
        Dim::Three => exact_point_triangle_distance(x, a, b, c).unwrap(),
    }
}

/// Leaves at `level` whose closest cell center lies within `d`, plus the
/// number of leaves whose distance falls inside the tolerance band.
fn oracle_set(
    forest: &Forest,
    level: u8,
    g: &CoordListGeometry,
    d: f64,
) -> (BTreeSet<BlockId>, usize) {
    let mut set = BTreeSet::new();
    let mut in_band = 0;
    for id in forest.leaf_blocks_at(level) {
        let m = forest
            .cell_centers(id)
            .into_iter()
            .flat_map(|c| (0..g.n_faces()).map(move |f| (c, f)))
            .map(|(c, f)| face_dist(g, f, c))
            .fold(f64::INFINITY, f64::min);
        if (m - d).abs() <= 1e-4 {
            in_band += 1;
        }
        if m <= d {
            set.insert(id);
        }
    }
    (set, in_band)
}

fn marked(forest: &Forest, level: u8) -> BTreeSet<BlockId> {
    forest.marked_at(level).into_iter().collect()
}

fn unit_forest(dim: Dim, n: usize) -> Forest {
    Forest::init_root_grid(Aabb::unit(dim), dim, &vec![n; dim.n()]).unwrap()
}

#[test]
fn naive_marking_matches_oracle_on_circle() {
    let g = circle(256);
    let mut f = unit_forest(Dim::Two, 32);
    mark_near_wall_naive(&mut f, 0, &g, radius(0.1), Backend::Serial).unwrap();
    let (want, band) = oracle_set(&f, 0, &g, 0.1);
    assert_eq!(band, 0);
    assert_eq!(marked(&f, 0), want);
}

#[test]
fn naive_marking_matches_oracle_on_sphere() {
    let g = sphere(11, 25);
    assert_eq!(g.n_faces(), 500);
    let mut f = unit_forest(Dim::Three, 8);
    mark_near_wall_naive(&mut f, 0, &g, radius(0.08), Backend::Serial).unwrap();
    let (want, band) = oracle_set(&f, 0, &g, 0.08);
    assert_eq!(band, 0);
    assert_eq!(marked(&f, 0), want);
}

#[test]
fn far_geometry_marks_no_block() {
    let g = index_to_coords(&generate_circle(Point::new2(0.5, 0.5), 0.01, 64).unwrap()).unwrap();
    let mut f = unit_forest(Dim::Two, 4);
    // the nearest cell centers sit about 0.034 from the circle
    let n = mark_near_wall_naive(&mut f, 0, &g, radius(0.02), Backend::Serial).unwrap();
    let (want, _) = oracle_set(&f, 0, &g, 0.02);
    assert!(want.is_empty());
    assert_eq!(n, 0);
}

#[test]
fn single_bin_matches_naive() {
    for (g, n) in [(circle(256), 32), (sphere(11, 25), 8)] {
        let dim = g.dim();
        let grid = BinGrid::new(Aabb::unit(dim), dim, 1).unwrap();
        let bins = fill_bins(
            &g,
            &grid,
            BinFraction::default(),
            &BinningOptions::default(),
            Backend::Serial,
        )
        .unwrap();
        let mut a = unit_forest(dim, n);
        let mut b = a.clone();
        mark_near_wall_naive(&mut a, 0, &g, radius(0.1), Backend::Serial).unwrap();
        mark_near_wall_binned(&mut b, 0, &g, &bins, &grid, radius(0.1), Backend::Serial).unwrap();
        assert_eq!(marked(&a, 0), marked(&b, 0));
    }
}

#[test]
fn binned_marks_bracket_naive() {
    let g = circle(12800);
    let grid = BinGrid::new(Aabb::unit(Dim::Two), Dim::Two, 8).unwrap();
    let bins = fill_bins(
        &g,
        &grid,
        BinFraction::default(),
        &BinningOptions::default(),
        Backend::Serial,
    )
    .unwrap();
    let mut naive = unit_forest(Dim::Two, 64);
    let mut binned = naive.clone();
    mark_near_wall_naive(&mut naive, 0, &g, radius(0.2), Backend::Serial).unwrap();
    mark_near_wall_binned(
        &mut binned,
        0,
        &g,
        &bins,
        &grid,
        radius(0.2),
        Backend::Serial,
    )
    .unwrap();
    let (n, before) = (marked(&naive, 0), marked(&binned, 0));
    assert!(before.is_subset(&n));
    assert!(
        before.len() < n.len(),
        "d larger than a bin should miss blocks before propagation"
    );
    propagate_marks(&mut binned, 0, radius(0.2), Backend::Serial).unwrap();
    assert!(marked(&binned, 0).is_superset(&n));
}

#[test]
fn propagation_is_a_pure_dilation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let mut f = unit_forest(Dim::Two, 16);
        for _ in 0..5 {
            let id = BlockId(rng.random_range(0..256));
            f.set_mark(id, RefineMark::Marked);
        }
        let rounds = rng.random_range(1..6);
        let mut once = f.clone();
        propagate_rounds(&mut once, 0, rounds, Backend::Serial).unwrap();
        for _ in 0..rounds {
            propagate_rounds(&mut f, 0, 1, Backend::Serial).unwrap();
        }
        assert_eq!(once, f);
        assert!(f.marks().iter().all(|&m| m != RefineMark::Intermediate));
    }
}

#[test]
fn binned_refinement_covers_naive() {
    let g = circle(1024);
    let mut params = RefineParams::new(radius(0.1), 3);
    params.strategy = Strategy::Naive;
    let mut naive = unit_forest(Dim::Two, 16);
    refine_near_wall(&mut naive, &g, &params).unwrap();
    let want: BTreeSet<_> = naive.leaf_keys().into_iter().collect();
    for b in [2, 4, 8, 16] {
        let mut f = unit_forest(Dim::Two, 16);
        params.strategy = Strategy::Binned;
        params.bin_density = b;
        refine_near_wall(&mut f, &g, &params).unwrap();
        // every naive leaf is covered by a binned leaf at the same or deeper level
        let got: BTreeSet<_> = f.leaf_keys().into_iter().collect();
        for &(level, c) in &want {
            let covered = (level..f.n_levels() as u8).any(|l| {
                let s = 1u32 << (l - level);
                got.contains(&(l, [c[0] * s, c[1] * s, c[2] * s]))
            });
            assert!(covered, "B={b}: leaf {level} {c:?} not covered");
        }
        assert!(f.is_balanced());
    }
}

#[test]
fn backends_agree() {
    let g = sphere(20, 40);
    let run = |backend| {
        let mut f = unit_forest(Dim::Three, 8);
        let mut params = RefineParams::new(radius(0.05), 3);
        params.backend = backend;
        params.bin_fraction = BinFraction::new(3).unwrap();
        let out = refine_near_wall(&mut f, &g, &params).unwrap();
        (f, out.levels, out.bins)
    };
    let (a, la, ba) = run(Backend::Serial);
    let (b, lb, bb) = run(Backend::Parallel);
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert_eq!(ba, bb);
}

#[test]
fn links_match_exact_distance() {
    let g = sphere(8, 12);
    let mut f = unit_forest(Dim::Three, 4);
    let mut params = RefineParams::new(radius(0.1), 2);
    params.bin_density = 4;
    let out = refine_near_wall(&mut f, &g, &params).unwrap();
    let (grid, bins) = out.bins.unwrap();
    let d = 0.06;
    let links = build_cell_face_links(
        &f,
        &g,
        &bins,
        &grid,
        radius(d),
        DEFAULT_LINK_CAPACITY,
        Backend::Serial,
    )
    .unwrap();
    assert!(!links.is_empty());
    let mut multi = 0;
    for id in f.leaf_blocks_at(1) {
        for cell in 0..64u16 {
            let x = f.cell_center(id, cell as usize);
            let bin = grid.bin_of_point(x).unwrap().linear;
            let want: Vec<u32> = bins
                .faces_in(bin)
                .iter()
                .copied()
                .filter(|&fc| face_dist(&g, fc as usize, x) <= d as f64)
                .collect();
            let got = links.get(id, cell).unwrap_or(&[]);
            assert_eq!(got, &want[..], "block {id:?} cell {cell}");
            if got.len() > 1 {
                multi += 1;
            }
        }
    }
    assert!(multi > 0, "expected cells near shared edges or corners");
}

#[test]
fn link_overflow_names_the_worst_cell() {
    let g = sphere(8, 12);
    let mut f = unit_forest(Dim::Three, 2);
    let grid = BinGrid::new(Aabb::unit(Dim::Three), Dim::Three, 1).unwrap();
    let bins = fill_bins(
        &g,
        &grid,
        BinFraction::default(),
        &BinningOptions::default(),
        Backend::Serial,
    )
    .unwrap();
    f.set_mark(BlockId(0), RefineMark::Marked);
    f.refine_marked(0).unwrap();
    let err =
        build_cell_face_links(&f, &g, &bins, &grid, radius(1.0), 4, Backend::Serial).unwrap_err();
    assert_eq!(err.kind(), nearwall_core::ErrorKind::Capacity);
    assert!(err
        .to_string()
        .contains(&format!("has {} faces", g.n_faces())));
}
