use std::collections::BTreeMap;

use dhondtxai::report::{
    parliament_layout, render_bar_svg, render_parliament_svg, rows_needed, ChartSpec,
    NEGATIVE_COLOR, POSITIVE_COLOR,
};
use dhondtxai::stats::{Direction, DirectionMap};
use dhondtxai::{dhondt_allocate, Entity, SeatAllocation};

const BREAST_CANCER: [(&str, u64); 10] = [
    ("mean radius", 6_271_130),
    ("mean texture", 20_068_244),
    ("mean perimeter", 7_038_052),
    ("mean area", 8_600_885),
    ("mean smoothness", 8_942_949),
    ("mean compactness", 5_174_850),
    ("mean concavity", 11_584_731),
    ("mean concave points", 20_593_389),
    ("mean symmetry", 7_344_121),
    ("mean fractal dimension", 4_381_644),
];

fn breast_cancer() -> SeatAllocation {
    let entities: Vec<Entity> = BREAST_CANCER
        .iter()
        .map(|(n, v)| Entity::new(*n, *v))
        .collect();
    dhondt_allocate(&entities, 600).unwrap()
}

#[test]
fn breast_cancer_parliament() {
    let svg = render_parliament_svg(&breast_cancer(), &ChartSpec::default());
    assert_eq!(svg.matches("<circle class=\"seat\"").count(), 600);
    assert_eq!(svg.matches("<g class=\"entity\"").count(), 10);
    assert!(svg.contains(">mean concave points: 124<"));
    assert!(svg.contains(">mean fractal dimension: 26<"));
    assert!(!svg.contains("footnote"));

    // Groups appear in descending seat order.
    let first = svg.find("data-entity=\"mean concave points\"").unwrap();
    let second = svg.find("data-entity=\"mean texture\"").unwrap();
    let last = svg.find("data-entity=\"mean fractal dimension\"").unwrap();
    assert!(first < second && second < last);
}

#[test]
fn breast_cancer_bars_follow_directions() {
    let directions: DirectionMap = BREAST_CANCER
        .iter()
        .map(|(n, _)| {
            let r = if *n == "mean fractal dimension" {
                0.01
            } else {
                -0.4
            };
            (n.to_string(), Direction::from_coefficient(r))
        })
        .collect();
    let svg = render_bar_svg(&breast_cancer(), &directions, &ChartSpec::default()).unwrap();
    assert_eq!(svg.matches("<g class=\"bar\"").count(), 10);
    assert_eq!(
        svg.matches(&format!("fill=\"{NEGATIVE_COLOR}\"")).count(),
        9
    );
    assert_eq!(
        svg.matches(&format!("fill=\"{POSITIVE_COLOR}\"")).count(),
        1
    );
}

#[test]
fn unseated_entities_are_footnoted() {
    let allocation =
        dhondt_allocate(&[Entity::new("big", 100), Entity::new("small", 1)], 3).unwrap();
    let svg = render_parliament_svg(&allocation, &ChartSpec::default());
    assert_eq!(svg.matches("<circle class=\"seat\"").count(), 3);
    assert!(svg.contains("Below threshold / no seats: small"));
    assert!(render_bar_svg(&allocation, &BTreeMap::new(), &ChartSpec::default()).is_err());
}

#[test]
fn layout_is_a_semicircle_sorted_by_angle() {
    for seats in [1u64, 2, 7, 60, 600, 1500] {
        let positions = parliament_layout(seats, None);
        assert_eq!(positions.len() as u64, seats);
        assert!(positions
            .iter()
            .all(|p| p.y >= -1e-12 && p.x.hypot(p.y) <= 1.0 + 1e-12));
        assert!(positions.windows(2).all(|w| w[0].angle >= w[1].angle));
        assert!(positions.iter().all(|p| p.row < rows_needed(seats)));
    }
}

#[test]
fn rendering_is_deterministic() {
    let spec = ChartSpec {
        title: Some("Breast cancer <mean features>".into()),
        ..ChartSpec::default()
    };
    let a = render_parliament_svg(&breast_cancer(), &spec);
    assert_eq!(a, render_parliament_svg(&breast_cancer(), &spec));
    assert!(a.contains("Breast cancer &lt;mean features&gt;"));
}
