use geoicn_core::geogrid::{GridSpec, TileId};
use geoicn_core::tessellate::constrained_tessellation;
use geoicn_core::{BBox, Feature, GeoCoord};
use proptest::prelude::*;
use serde_json::{json, Map};

const G: GridSpec = GridSpec::OGB;

#[test]
fn feature_tiles_nest_across_levels() {
    let f = Feature::point("o1", "Foo", "Shop", "Alice", GeoCoord::new(12.515, 41.895).unwrap(), Map::new());
    let names: Vec<String> = (0..G.levels())
        .map(|l| {
            let tiles = G.intersecting_tiles(&f.geometry, l).unwrap();
            assert_eq!(tiles.len(), 1);
            G.tile_prefix(*tiles.iter().next().unwrap()).to_uri()
        })
        .collect();
    assert_eq!(names, ["ndn:/OGB/12/41/GPS-ID", "ndn:/OGB/12/41/58/GPS-ID", "ndn:/OGB/12/41/58/19/GPS-ID"]);
}

#[test]
fn parsed_multipoint_spans_two_level0_tiles() {
    let v = json!({
        "type": "Feature",
        "geometry": {"type": "MultiPoint", "coordinates": [[12.99, 41.5], [13.01, 41.5]]},
        "properties": {"oid": "m", "tid": "Foo", "cid": "Shop", "uid": "Alice"},
    });
    let f = Feature::from_value(v).unwrap();
    let l0: Vec<TileId> = G.intersecting_tiles(&f.geometry, 0).unwrap().into_iter().collect();
    assert_eq!(l0, vec![G.tile(0, 12, 41).unwrap(), G.tile(0, 13, 41).unwrap()]);
    let q = BBox::new(12.9, 41.4, 13.0, 41.6).unwrap();
    assert!(f.geometry.intersects(&q) && !f.geometry.within(&q));
}

proptest! {
    // A point inside the query lies in exactly one tile of every cover.
    #[test]
    fn every_inside_point_is_covered_once(
        x in -30.0f64..30.0, y in -30.0f64..30.0, w in 0.001f64..1.5, h in 0.001f64..1.5,
        u in 0.0f64..1.0, v in 0.0f64..1.0, k in 1usize..120,
    ) {
        let q = BBox::new(x, y, x + w, y + h).unwrap();
        let p = GeoCoord::new(x + u * w, y + v * h).unwrap();
        prop_assume!(q.contains(&p));
        let t = constrained_tessellation(&q, k).unwrap();
        let hits = t.tiles.iter().filter(|tile| G.tile_bbox::<f64>(**tile).contains(&p)).count();
        prop_assert_eq!(hits, 1);
    }
}
