mod support;

use proptest::prelude::*;

use support::reference::RefEnv;
use support::{ascii_map, poi_at, tile_type, walker, wall_type, Harness};

use seekworld::dynamics::{for_each_visible, view_radius};
use seekworld::map::{MapConfig, TileTypeDef, TypeGrid};
use seekworld::{EnvRng, KnowledgeMode, MapSpec};

fn visible_after_one_step(spec: &MapSpec) -> Vec<usize> {
    let mut h = Harness::new(spec.clone(), KnowledgeMode::None, 0);
    h.moves(&vec![(0.0, 0.0); spec.n_agents()]);
    let mut v: Vec<usize> = h.scratch.visible(0).iter().map(|&t| t as usize).collect();
    v.sort_unstable();
    v
}

fn oracle_visible(spec: &MapSpec) -> Vec<usize> {
    let mut rng = EnvRng::new(0);
    let env = RefEnv::reset(spec, KnowledgeMode::None, &mut rng);
    env.visible_tiles(0).iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

#[test]
fn flat_map_sees_the_distance_disc() {
    let row = ".".repeat(7);
    let rows = vec![row.as_str(); 7];
    let spec = ascii_map(&rows, &[], vec![walker(0, 2, 2, 2.0)], vec![poi_at(0, 6, 6, 1)], None);
    let got = visible_after_one_step(&spec);
    let mut want = Vec::new();
    for y in 0..7i32 {
        for x in 0..7i32 {
            if (x - 2).pow(2) + (y - 2).pow(2) <= 4 {
                want.push((y * 7 + x) as usize);
            }
        }
    }
    assert_eq!(got, want);
    assert!(got.contains(&(2 * 7 + 2)), "own tile");
}

#[test]
fn high_wall_hides_what_is_behind_it() {
    let cliff = TileTypeDef { walkable: false, altitude: 9.0, ..tile_type(1, [5, 5, 5]) };
    let spec = ascii_map(&["...^.."], &[(b'^', cliff)], vec![walker(0, 1, 0, 4.0)], vec![poi_at(0, 5, 0, 1)], None);
    let got = visible_after_one_step(&spec);
    // the cliff itself is visible, the tiles behind it are not
    assert_eq!(got, vec![0, 1, 2, 3]);
}

#[test]
fn blocking_tiles_occlude_regardless_of_height() {
    let wall = wall_type(1, [5, 5, 5], 0.0);
    let spec = ascii_map(&["..#..."], &[(b'#', wall)], vec![walker(0, 0, 0, 5.0)], vec![poi_at(0, 5, 0, 1)], None);
    assert_eq!(visible_after_one_step(&spec), vec![0, 1, 2]);
}

#[test]
fn altitude_widens_view() {
    assert_eq!(view_radius(2.0, 10.0, 10.0), 4.0);
    let hill = TileTypeDef { altitude: 10.0, ..tile_type(1, [5, 5, 5]) };
    let row = ".".repeat(11);
    let mut rows: Vec<String> = vec![row.clone(); 11];
    rows[5] = format!("{}^{}", ".".repeat(5), ".".repeat(5));
    let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
    let spec = ascii_map(&rows, &[(b'^', hill)], vec![walker(0, 5, 5, 2.0)], vec![poi_at(0, 0, 0, 1)], None);
    let got = visible_after_one_step(&spec);
    assert!(got.contains(&(5 * 11 + 9)), "4 tiles east is visible from the hill");
    assert!(!got.contains(&(5 * 11 + 10)));
    assert_eq!(got, oracle_visible(&spec));
}

fn arb_terrain() -> impl Strategy<Value = MapSpec> {
    (3usize..14, 3usize..14).prop_flat_map(|(w, h)| {
        (
            Just((w, h)),
            prop::collection::vec(0u8..4, w * h),
            0..w,
            0..h,
            0.5f32..6.0,
            prop::collection::vec(0.0f32..8.0, 3),
        )
            .prop_map(|((w, h), mut cells, ax, ay, vr, alts)| {
                cells[ay * w + ax] = 0;
                let table = vec![
                    tile_type(0, [0, 0, 0]),
                    TileTypeDef { altitude: alts[0], ..tile_type(1, [1, 1, 1]) },
                    TileTypeDef { altitude: alts[1], ..tile_type(2, [2, 2, 2]) },
                    TileTypeDef { altitude: alts[2], ..wall_type(3, [3, 3, 3], 0.0) },
                ];
                let config = MapConfig {
                    type_table: table,
                    speeds: vec![1.0; 4],
                    agents: vec![walker(0, ax as u16, ay as u16, vr)],
                    pois: vec![poi_at(0, ax as u16, ay as u16, 1)],
                    horizon: 10,
                    rewards: Default::default(),
                    dynamics: Default::default(),
                };
                MapSpec::new(TypeGrid { width: w, height: h, cells }, config).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_ray_walk_over_every_tile(spec in arb_terrain()) {
        prop_assert_eq!(visible_after_one_step(&spec), oracle_visible(&spec));
    }

    #[test]
    fn visit_order_is_row_major(spec in arb_terrain()) {
        let h = Harness::new(spec.clone(), KnowledgeMode::None, 0);
        let v = h.view();
        let mut order = Vec::new();
        for_each_visible(v.grid(), h.template.rules(), &v.agents()[0], |i| order.push(i));
        prop_assert!(order.windows(2).all(|w| w[0] < w[1]));
    }
}
