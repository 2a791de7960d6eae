//! The candidate fixture suite: utterances of every instruction kind issued
//! from several starts on the shipped worlds.

use waypref_core::{generate_candidates, load_world, parse_instruction, InstructionKind, PlannerConfig, Pose};

use super::geometry::cell_of;
use super::scan::{q, scan, top_k};

pub const COMPACT: &str = include_str!("../../../../data/worlds/compact.world");
pub const OFFICE: &str = include_str!("../../../../data/worlds/office.world");

pub const COMPACT_UTTERANCES: [(&str, InstructionKind); 10] = [
    ("Go to the gap", InstructionKind::ApproachEntrance),
    ("Go into the den", InstructionKind::EnterRoom),
    ("Approach the box", InstructionKind::ApproachObject),
    ("Explore the corridor", InstructionKind::NavigateUnexplored),
    ("Move around the post", InstructionKind::HandleObstruction),
    ("Go left", InstructionKind::DirectionOnly),
    ("Head 4 feet north", InstructionKind::DirectionOrientation),
    ("Turn 30 degrees to the right", InstructionKind::DirectionOrientation),
    ("Move forward 3 feet", InstructionKind::MetricMove),
    ("Move backward 2 meters", InstructionKind::MetricMove),
];

pub const OFFICE_UTTERANCES: [(&str, InstructionKind); 8] = [
    ("Go to the east_door", InstructionKind::ApproachEntrance),
    ("Go into the lab", InstructionKind::EnterRoom),
    ("Move forward until you reach the desk", InstructionKind::ApproachObject),
    ("Go to the end of the hallway", InstructionKind::NavigateUnexplored),
    ("Move around the cone", InstructionKind::HandleObstruction),
    ("Go forward", InstructionKind::DirectionOnly),
    ("Head 5 feet west", InstructionKind::DirectionOrientation),
    ("Move right 1 meter", InstructionKind::MetricMove),
];

pub fn compact_starts() -> Vec<Pose> {
    vec![
        load_world(COMPACT).unwrap().start().unwrap(),
        Pose::new(2.1, 1.1, 0.7),
        Pose::new(4.3, 0.4, 3.0),
        Pose::new(2.6, 2.9, -1.2),
        Pose::new(1.2, 4.1, -2.6),
        Pose::new(4.4, 4.3, 1.9),
        Pose::new(0.9, 2.4, 0.0),
        Pose::new(3.1, 3.6, 2.5),
    ]
}

pub fn office_starts() -> Vec<Pose> {
    vec![
        load_world(OFFICE).unwrap().start().unwrap(),
        Pose::new(3.1, 1.9, 1.6),
        Pose::new(5.6, 3.6, 2.8),
        Pose::new(6.9, 0.7, -0.4),
    ]
}

fn yaw_key(yaw: f64) -> i64 {
    let k = q(yaw);
    if k <= -3_141_592 {
        k + 6_283_185
    } else {
        k
    }
}

/// Compares every (start, utterance) case against the scan and returns the
/// number of feasible cases, or the first disagreement.
pub fn check_fixture(text: &str, starts: &[Pose], utterances: &[(&str, InstructionKind)]) -> Result<usize, String> {
    let map = load_world(text).unwrap();
    let cfg = PlannerConfig::default();
    let mut compared = 0;
    for start in starts {
        for &(text, kind) in utterances {
            let instr = parse_instruction(text).unwrap();
            if instr.kind != kind {
                return Err(format!("{text} parsed as {:?}", instr.kind));
            }
            let want = top_k(scan(&map, &cfg, start, &instr), cfg.k);
            match generate_candidates(&map, &cfg, start, &instr) {
                Ok(cands) => {
                    let got: Vec<_> = cands
                        .iter()
                        .map(|c| (cell_of(&map, c.pose.xy()).unwrap(), yaw_key(c.pose.yaw())))
                        .collect();
                    let want: Vec<_> = want.into_iter().map(|(c, y)| (c, yaw_key(y as f64 / 1e6))).collect();
                    if got != want {
                        return Err(format!("{text} from {:?}: {got:?} vs {want:?}", start.xy()));
                    }
                    compared += 1;
                }
                Err(e) if !want.is_empty() => {
                    return Err(format!("{text} from {:?}: {e} but scan found {want:?}", start.xy()));
                }
                Err(_) => {}
            }
        }
    }
    Ok(compared)
}
