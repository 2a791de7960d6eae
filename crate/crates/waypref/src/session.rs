//! One bridge session: parse, plan, choose, execute, learn.

use std::sync::Arc;

use waypref_core::language::{default_grammar, parse_instruction_with, split_feedback, Grammar};
use waypref_core::planner::FeatureContext;
use waypref_core::preference::{derive_seed, select_waypoint, update_from_feedback};
use waypref_core::{
    generate_candidates, Instruction, PlannerConfig, PlannerError, Polarity, Pose, PreferenceModel, WaypointCandidate,
    WorldMap,
};

use crate::config::TimeConfig;
use crate::protocol::*;

/// A decision awaiting the user's feedback.
#[derive(Clone, Debug, PartialEq)]
pub struct Pending {
    pub instruction: Instruction,
    /// Pose the instruction was issued from.
    pub start: Pose,
    pub candidates: Vec<WaypointCandidate>,
    pub chosen: WaypointCandidate,
}

#[derive(Clone, Debug)]
pub struct SessionSettings {
    pub planner: PlannerConfig,
    pub time: TimeConfig,
    /// When false the model is never updated (frozen baseline).
    pub learning: bool,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            time: TimeConfig::default(),
            learning: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SessionStats {
    pub instructions: u64,
    pub corrections: u64,
    pub accepts: u64,
    pub utterances: u64,
    pub travel: f64,
}

impl SessionStats {
    pub fn sim_time(&self, time: &TimeConfig) -> f64 {
        self.travel / time.speed + self.utterances as f64 * time.utterance_cost
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("start pose is invalid: {0}")]
    BadStart(waypref_core::WorldError),
}

pub struct Session {
    id: String,
    world_name: String,
    world: Arc<WorldMap>,
    pose: Pose,
    model: PreferenceModel,
    pending: Option<Pending>,
    seed: u64,
    decisions: u64,
    in_seq: u64,
    out_seq: u64,
    transcript: Vec<BridgeMessage>,
    grammar: Grammar,
    settings: SessionSettings,
    stats: SessionStats,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        world_name: impl Into<String>,
        world: Arc<WorldMap>,
        start: Pose,
        model: PreferenceModel,
        seed: u64,
        settings: SessionSettings,
    ) -> Result<Self, SessionError> {
        world.check_pose(&start).map_err(SessionError::BadStart)?;
        Ok(Self {
            id: id.into(),
            world_name: world_name.into(),
            world,
            pose: start,
            model,
            pending: None,
            seed,
            decisions: 0,
            in_seq: 0,
            out_seq: 0,
            transcript: Vec::new(),
            grammar: default_grammar(),
            settings,
            stats: SessionStats::default(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn model(&self) -> &PreferenceModel {
        &self.model
    }

    pub fn into_model(self) -> PreferenceModel {
        self.model
    }

    pub fn pending(&self) -> Option<&Pending> {
        self.pending.as_ref()
    }

    pub fn world(&self) -> &WorldMap {
        &self.world
    }

    pub fn stats(&self) -> &SessionStats {
        &self.stats
    }

    pub fn sim_time(&self) -> f64 {
        self.stats.sim_time(&self.settings.time)
    }

    pub fn transcript(&self) -> &[BridgeMessage] {
        &self.transcript
    }

    pub fn next_inbound_seq(&self) -> u64 {
        self.in_seq
    }

    fn emit(&mut self, out: &mut Vec<BridgeMessage>, body: Body) {
        let msg = BridgeMessage::new(self.id.clone(), self.out_seq, body).canonical();
        self.out_seq += 1;
        self.transcript.push(msg.clone());
        out.push(msg);
    }

    /// Records an inbound message. The caller has already checked its seq.
    pub fn record_inbound(&mut self, body: Body) {
        let msg = BridgeMessage::new(self.id.clone(), self.in_seq, body).canonical();
        self.in_seq += 1;
        self.transcript.push(msg);
    }

    fn grid(&self) -> GridMsg {
        let w = &self.world;
        GridMsg {
            width: w.width(),
            height: w.height(),
            resolution: w.resolution(),
            rows: (0..w.height())
                .rev()
                .map(|y| {
                    (0..w.width())
                        .map(|x| if w.is_free((x, y)) { '.' } else { '#' })
                        .collect()
                })
                .collect(),
            landmarks: w
                .landmarks()
                .iter()
                .map(|l| LandmarkMsg {
                    name: l.name.clone(),
                    kind: l.kind.as_str().to_string(),
                    reference: [l.reference_point.x, l.reference_point.y],
                })
                .collect(),
        }
    }

    /// Messages answering `open`: the model snapshot and the full map.
    pub fn opening(&mut self) -> Vec<BridgeMessage> {
        let mut out = Vec::new();
        let status = StatusPayload {
            text: "open".into(),
            update_count: self.model.update_count,
            model: Some(ModelSnapshot::of(&self.model)),
        };
        self.emit(&mut out, Body::Status(status));
        let map = MapUpdatePayload {
            world: self.world_name.clone(),
            pose: PoseMsg::from(&self.pose),
            grid: Some(self.grid()),
        };
        self.emit(&mut out, Body::MapUpdate(map));
        out
    }

    /// The final metrics message.
    pub fn closing(&mut self) -> Vec<BridgeMessage> {
        let mut out = Vec::new();
        let m = self.metrics();
        self.emit(&mut out, Body::Metrics(m));
        out
    }

    pub fn metrics(&self) -> MetricsPayload {
        MetricsPayload {
            instructions: self.stats.instructions,
            corrections: self.stats.corrections,
            accepts: self.stats.accepts,
            utterances: self.stats.utterances,
            travel: self.stats.travel,
            sim_time: self.sim_time(),
        }
    }

    /// Records `text` as the next inbound utterance and answers it.
    pub fn handle_utterance(&mut self, text: &str) -> Vec<BridgeMessage> {
        self.record_inbound(Body::Utterance(UtterancePayload { text: text.to_string() }));
        self.respond(text)
    }

    /// Answers an utterance that has already been recorded.
    pub fn respond(&mut self, text: &str) -> Vec<BridgeMessage> {
        self.stats.utterances += 1;
        let mut out = Vec::new();
        match split_feedback(text) {
            Some((polarity, rest)) => self.feedback(&mut out, polarity, &rest),
            None => self.instruction(&mut out, text),
        }
        out
    }

    fn error(&mut self, out: &mut Vec<BridgeMessage>, code: &str, text: String) {
        self.emit(
            out,
            Body::Error(ErrorPayload {
                code: code.into(),
                text,
            }),
        );
    }

    fn planner_problem(&mut self, out: &mut Vec<BridgeMessage>, err: PlannerError) {
        let max_feasible = match err {
            PlannerError::Infeasible { max_feasible } => Some(max_feasible),
            _ => None,
        };
        let text = match max_feasible {
            Some(d) if d > 0.0 => format!("I can only move about {d:.2} meters that way."),
            Some(_) => "I cannot find a free pose for that instruction here.".to_string(),
            None => err.to_string(),
        };
        self.emit(out, Body::Clarification(ClarificationPayload { text, max_feasible }));
    }

    fn next_seed(&mut self) -> u64 {
        let s = derive_seed(self.seed, self.decisions);
        self.decisions += 1;
        s
    }

    /// Moves the robot onto `target`, accounting travel, and reports it.
    fn execute(
        &mut self,
        out: &mut Vec<BridgeMessage>,
        instr: &Instruction,
        via: ExecutedVia,
        n_candidates: usize,
        chosen: &WaypointCandidate,
    ) {
        let travel = round9(self.world.shortest_path_length(&self.pose, &chosen.pose).unwrap_or(0.0));
        self.pose = chosen.pose;
        self.stats.travel += travel;
        self.stats.instructions += 1;
        let pose = PoseMsg::from(&self.pose);
        self.emit(
            out,
            Body::Executed(ExecutedPayload {
                instruction: instr.render(),
                kind: instr.kind.name().to_string(),
                via,
                pose,
                candidates: n_candidates,
                chosen: chosen.id,
                travel,
            }),
        );
        let world = self.world_name.clone();
        self.emit(
            out,
            Body::MapUpdate(MapUpdatePayload {
                world,
                pose,
                grid: None,
            }),
        );
    }

    fn instruction(&mut self, out: &mut Vec<BridgeMessage>, text: &str) {
        let instr = match parse_instruction_with(&self.grammar, text) {
            Ok(i) => i,
            Err(e) => return self.error(out, "unrecognized", e.to_string()),
        };
        let candidates = match generate_candidates(&self.world, &self.settings.planner, &self.pose, &instr) {
            Ok(c) => c,
            Err(e) => return self.planner_problem(out, e),
        };
        // A fresh instruction abandons any decision still awaiting feedback.
        self.pending = None;
        let seed = self.next_seed();
        let chosen = select_waypoint(&self.model, &candidates, seed)
            .expect("planner returns candidates")
            .clone();
        let start = self.pose;
        self.execute(out, &instr, ExecutedVia::Instruction, candidates.len(), &chosen);
        self.pending = Some(Pending {
            instruction: instr,
            start,
            candidates,
            chosen,
        });
    }

    fn feedback(&mut self, out: &mut Vec<BridgeMessage>, polarity: Polarity, rest: &str) {
        let Some(pending) = self.pending.clone() else {
            return self.error(out, "no_pending", "there is no decision awaiting feedback".into());
        };
        match polarity {
            Polarity::Accept => {
                if self.settings.learning {
                    self.model = update_from_feedback(
                        &self.model,
                        &pending.chosen,
                        &pending.candidates,
                        Polarity::Accept,
                        None,
                    )
                    .expect("accept needs no correction");
                }
                self.pending = None;
                self.stats.accepts += 1;
                let status = StatusPayload {
                    text: "ack".into(),
                    update_count: self.model.update_count,
                    model: None,
                };
                self.emit(out, Body::Status(status));
                if !rest.trim().is_empty() {
                    self.instruction(out, rest);
                }
            }
            Polarity::Correct => self.correction(out, pending, rest),
        }
    }

    fn correction(&mut self, out: &mut Vec<BridgeMessage>, mut pending: Pending, text: &str) {
        let replacement = match parse_instruction_with(&self.grammar, text) {
            Ok(i) => i,
            Err(e) => return self.error(out, "unrecognized", e.to_string()),
        };
        // The robot is at the chosen pose; the correction is planned from there.
        let options = match generate_candidates(&self.world, &self.settings.planner, &self.pose, &replacement) {
            Ok(c) => c,
            Err(e) => return self.planner_problem(out, e),
        };
        let seed = self.next_seed();
        let selected = select_waypoint(&self.model, &options, seed)
            .expect("planner returns candidates")
            .clone();
        // Score the corrected pose as an answer to the original instruction.
        let ctx = FeatureContext::new(
            &self.world,
            &self.settings.planner,
            &pending.start,
            &pending.instruction,
        )
        .expect("original instruction was plannable");
        let corrected = WaypointCandidate {
            id: pending.candidates.iter().map(|c| c.id + 1).max().unwrap_or(0),
            pose: selected.pose,
            features: ctx.features(&selected.pose),
        };
        self.execute(out, &replacement, ExecutedVia::Correction, options.len(), &selected);
        self.stats.corrections += 1;
        if self.settings.learning {
            self.model = update_from_feedback(
                &self.model,
                &pending.chosen,
                &pending.candidates,
                Polarity::Correct,
                Some(&corrected),
            )
            .expect("correction carries its candidate");
        }
        pending.candidates.push(corrected.clone());
        pending.chosen = corrected;
        self.pending = Some(pending);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn office() -> Arc<WorldMap> {
        Arc::new(waypref_core::load_world(include_str!("../../../data/worlds/office.world")).unwrap())
    }

    fn session() -> Session {
        let w = office();
        let start = w.start().unwrap();
        Session::new(
            "s",
            "office",
            w,
            start,
            PreferenceModel::new("u"),
            1,
            SessionSettings::default(),
        )
        .unwrap()
    }

    fn kinds(msgs: &[BridgeMessage]) -> Vec<&'static str> {
        msgs.iter().map(|m| m.body.kind()).collect()
    }

    #[test]
    fn instruction_executes_and_sets_pending() {
        let mut s = session();
        let out = s.handle_utterance("Go to the doorway");
        assert_eq!(kinds(&out), ["executed", "map_update"]);
        assert!(s.pending().is_some());
        let out = s.handle_utterance("Yes");
        assert_eq!(kinds(&out), ["status"]);
        assert_eq!(s.model().update_count, 1);
        assert!(s.pending().is_none());
    }

    #[test]
    fn wall_ahead_asks_for_clarification() {
        let mut s = session();
        s.handle_utterance("Turn 90 degrees to the left");
        s.handle_utterance("Yes");
        let before = (s.pose(), s.model().clone());
        let out = s.handle_utterance("Move forward eight feet");
        assert_eq!(kinds(&out), ["clarification"]);
        match &out[0].body {
            Body::Clarification(c) => assert!(c.max_feasible.unwrap() < 8.0 * 0.3048),
            _ => unreachable!(),
        }
        assert_eq!((s.pose(), s.model().clone()), before);
    }

    #[test]
    fn feedback_without_pending_and_gibberish_are_errors() {
        let mut s = session();
        assert_eq!(kinds(&s.handle_utterance("Yes")), ["error"]);
        assert_eq!(
            kinds(&s.handle_utterance("No, robot turn 15 degrees to the right")),
            ["error"]
        );
        assert_eq!(kinds(&s.handle_utterance("dance a little")), ["error"]);
        assert!(s.pending().is_none());
    }

    #[test]
    fn correction_replans_from_the_chosen_pose() {
        let mut s = session();
        s.handle_utterance("Go to the doorway");
        let chosen = s.pending().unwrap().chosen.clone();
        let out = s.handle_utterance("No, robot turn 15 degrees to the right");
        assert_eq!(kinds(&out), ["executed", "map_update"]);
        let p = s.pending().unwrap();
        assert_eq!(p.candidates.len(), 9);
        assert_eq!(p.chosen.id, 8);
        assert_eq!(p.chosen.pose.xy(), chosen.pose.xy());
        assert_eq!(s.stats().corrections, 1);
        assert_eq!(s.model().update_count, 1);
        // "Yes, robot ... next" accepts and starts the next instruction.
        let out = s.handle_utterance("Yes, robot go into the lab next");
        assert_eq!(kinds(&out), ["status", "executed", "map_update"]);
        assert_eq!(s.model().update_count, 2);
    }
}
