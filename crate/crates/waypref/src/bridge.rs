//! The message bridge: connections over TCP, per-user model leases,
//! transcripts and replay.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;

use waypref_core::{Pose, PreferenceModel, WorldMap};

use crate::config::LearnerConfig;
use crate::protocol::{Body, BridgeMessage, ErrorPayload, OpenPayload, ProtocolError};
use crate::session::{Session, SessionSettings};
use crate::store::{validate_user_id, LeasedModel, ModelStore, StoreError};

/// The robot's pose when a session opens: the world's declared start, or the
/// first free cell facing east.
pub fn default_start(world: &WorldMap) -> Option<Pose> {
    world.start().or_else(|| {
        (0..world.height())
            .flat_map(|y| (0..world.width()).map(move |x| (x, y)))
            .find(|&c| world.is_free(c))
            .map(|c| {
                let p = world.cell_center(c);
                Pose::new(p.x, p.y, 0.0)
            })
    })
}

/// Server-wide state shared by all connections.
pub struct Bridge {
    worlds: BTreeMap<String, Arc<WorldMap>>,
    store: ModelStore,
    transcripts: Option<PathBuf>,
    settings: SessionSettings,
    learner: LearnerConfig,
    active: Mutex<HashSet<String>>,
}

/// Protocol-level rejection. These replies are not part of the session
/// transcript.
fn reject(session: &str, seq: u64, code: &str, text: impl Into<String>) -> String {
    BridgeMessage::new(
        session,
        seq,
        Body::Error(ErrorPayload {
            code: code.into(),
            text: text.into(),
        }),
    )
    .to_line()
}

impl Bridge {
    pub fn new(
        worlds: BTreeMap<String, Arc<WorldMap>>,
        store: ModelStore,
        transcripts: Option<PathBuf>,
        settings: SessionSettings,
        learner: LearnerConfig,
    ) -> Self {
        Self {
            worlds,
            store,
            transcripts,
            settings,
            learner,
            active: Mutex::default(),
        }
    }

    pub fn world_names(&self) -> impl Iterator<Item = &str> {
        self.worlds.keys().map(String::as_str)
    }

    /// Accepts connections until the listener fails, one thread each.
    pub fn serve(self: Arc<Self>, listener: TcpListener) -> io::Result<()> {
        for stream in listener.incoming() {
            let stream = stream?;
            let bridge = self.clone();
            thread::spawn(move || {
                if let Err(e) = bridge.handle_stream(stream) {
                    eprintln!("connection error: {e}");
                }
            });
        }
        Ok(())
    }

    fn handle_stream(&self, stream: TcpStream) -> io::Result<()> {
        let reader = BufReader::new(stream.try_clone()?);
        self.handle(reader, stream)
    }

    /// Runs one connection: newline-delimited messages in, replies out.
    pub fn handle(&self, reader: impl BufRead, mut writer: impl Write) -> io::Result<()> {
        let mut conn = Connection::new(self);
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for out in conn.receive(&line) {
                writer.write_all(out.as_bytes())?;
                writer.write_all(b"\n")?;
            }
            writer.flush()?;
            if conn.is_closed() {
                break;
            }
        }
        conn.finish()
    }

    /// Appends new transcript lines; a failure is reported to the client as
    /// an error line outside the transcript.
    fn persist(&self, open: &mut OpenSession<'_>) -> Option<String> {
        let dir = self.transcripts.as_ref()?;
        open.append_transcript(dir).err().map(|e| {
            let id = open.session.id().to_string();
            reject(&id, 0, "transcript_io", e.to_string())
        })
    }

    fn open(&self, msg: &BridgeMessage, open: &OpenPayload) -> Result<OpenSession<'_>, String> {
        let fail = |code: &str, text: String| reject(&msg.session, msg.seq, code, text);
        if msg.seq != 0 {
            return Err(fail("bad_seq", format!("expected seq 0, got {}", msg.seq)));
        }
        if validate_user_id(&msg.session).is_err() {
            return Err(fail("bad_session", format!("invalid session id `{}`", msg.session)));
        }
        let world = self
            .worlds
            .get(&open.world)
            .ok_or_else(|| fail("unknown_world", format!("no world named `{}`", open.world)))?
            .clone();
        let start = default_start(&world).ok_or_else(|| fail("unknown_world", "world has no free cell".into()))?;
        if !self.active.lock().expect("session set").insert(msg.session.clone()) {
            return Err(fail(
                "duplicate_session",
                format!("session `{}` is already open", msg.session),
            ));
        }
        let guard = ActiveSession {
            bridge: self,
            id: msg.session.clone(),
        };
        let learner = &self.learner;
        let leased = self
            .store
            .lease(&open.user, || PreferenceModel {
                learning_rate: learner.learning_rate,
                epsilon: learner.epsilon,
                ..PreferenceModel::new(&open.user)
            })
            .map_err(|e| {
                let code = match e {
                    StoreError::Busy(_) => "busy",
                    StoreError::BadUserId(_) => "bad_user",
                    _ => "model_record",
                };
                fail(code, e.to_string())
            })?;
        let mut session = Session::new(
            msg.session.clone(),
            open.world.clone(),
            world,
            start,
            leased.model.clone(),
            open.seed,
            self.settings.clone(),
        )
        .map_err(|e| fail("unknown_world", e.to_string()))?;
        session.record_inbound(msg.body.clone());
        Ok(OpenSession {
            session,
            leased,
            written: 0,
            _guard: guard,
        })
    }
}

struct ActiveSession<'b> {
    bridge: &'b Bridge,
    id: String,
}

impl Drop for ActiveSession<'_> {
    fn drop(&mut self) {
        if let Ok(mut active) = self.bridge.active.lock() {
            active.remove(&self.id);
        }
    }
}

struct OpenSession<'b> {
    session: Session,
    leased: LeasedModel,
    /// Transcript messages already on disk.
    written: usize,
    _guard: ActiveSession<'b>,
}

impl OpenSession<'_> {
    /// Appends the transcript messages not yet on disk; the first call
    /// truncates any earlier file of the same session id.
    fn append_transcript(&mut self, dir: &Path) -> io::Result<()> {
        let pending = &self.session.transcript()[self.written..];
        if pending.is_empty() {
            return Ok(());
        }
        fs::create_dir_all(dir)?;
        let mut text = String::new();
        for m in pending {
            text.push_str(&m.to_line());
            text.push('\n');
        }
        let path = dir.join(format!("{}.log", self.session.id()));
        let mut f = if self.written == 0 {
            fs::File::create(path)?
        } else {
            OpenOptions::new().append(true).open(path)?
        };
        f.write_all(text.as_bytes())?;
        f.sync_data()?;
        self.written += pending.len();
        Ok(())
    }
}

/// One client connection: waits for `open`, then routes messages to the
/// session until `close` or end of input.
pub struct Connection<'b> {
    bridge: &'b Bridge,
    open: Option<OpenSession<'b>>,
    closed: bool,
}

impl<'b> Connection<'b> {
    pub fn new(bridge: &'b Bridge) -> Self {
        Self {
            bridge,
            open: None,
            closed: false,
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Handles one inbound line and returns the reply lines.
    pub fn receive(&mut self, line: &str) -> Vec<String> {
        if self.closed {
            return vec![reject("", 0, "closed", "the session is closed")];
        }
        let msg = match BridgeMessage::from_line(line) {
            Ok(m) => m,
            Err(ProtocolError::Version(v)) => {
                return vec![reject("", 0, "version", format!("unsupported version {v}"))]
            }
            Err(e) => return vec![reject("", 0, "malformed", e.to_string())],
        };
        if !msg.body.is_inbound() {
            return vec![reject(
                &msg.session,
                msg.seq,
                "unexpected_kind",
                format!("`{}` is server → client only", msg.body.kind()),
            )];
        }
        let Some(open) = self.open.as_mut() else {
            let Body::Open(payload) = &msg.body else {
                return vec![reject(
                    &msg.session,
                    msg.seq,
                    "expected_open",
                    "the first message must be `open`",
                )];
            };
            return match self.bridge.open(&msg, payload) {
                Ok(mut o) => {
                    let out = o.session.opening();
                    let mut lines: Vec<String> = out.iter().map(BridgeMessage::to_line).collect();
                    lines.extend(self.bridge.persist(&mut o));
                    self.open = Some(o);
                    lines
                }
                Err(line) => vec![line],
            };
        };
        let session = &mut open.session;
        if msg.session != session.id() {
            return vec![reject(
                &msg.session,
                msg.seq,
                "wrong_session",
                format!("this connection carries session `{}`", session.id()),
            )];
        }
        let expected = session.next_inbound_seq();
        if msg.seq != expected {
            return vec![reject(
                &msg.session,
                msg.seq,
                "bad_seq",
                format!("expected seq {expected}, got {}", msg.seq),
            )];
        }
        let out = match msg.body {
            Body::Open(_) => {
                return vec![reject(
                    &msg.session,
                    msg.seq,
                    "already_open",
                    "the session is already open",
                )]
            }
            Body::Utterance(ref u) => session.handle_utterance(&u.text),
            Body::Close(_) => {
                session.record_inbound(msg.body.clone());
                self.closed = true;
                session.closing()
            }
            _ => unreachable!("inbound kinds"),
        };
        let mut lines: Vec<String> = out.iter().map(BridgeMessage::to_line).collect();
        lines.extend(self.bridge.persist(open));
        lines
    }

    /// Persists the model and any unwritten transcript lines; also runs
    /// when input ends without `close`.
    pub fn finish(self) -> io::Result<()> {
        let Some(mut open) = self.open else {
            return Ok(());
        };
        open.leased.save(open.session.model()).map_err(io::Error::other)?;
        if let Some(dir) = &self.bridge.transcripts {
            open.append_transcript(dir)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: ProtocolError },
    #[error("transcript must start with `open` followed by a `status` carrying the model")]
    NoOpening,
    #[error("transcript names unknown world `{0}`")]
    UnknownWorld(String),
    #[error("the opening map update has an invalid pose: {0}")]
    BadStart(String),
}

/// Outcome of re-executing a transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub recorded: Vec<String>,
    pub replayed: Vec<String>,
}

impl Replay {
    pub fn matches(&self) -> bool {
        self.recorded == self.replayed
    }

    /// Index of the first outbound line that differs.
    pub fn first_mismatch(&self) -> Option<usize> {
        let n = self.recorded.len().max(self.replayed.len());
        (0..n).find(|&i| self.recorded.get(i) != self.replayed.get(i))
    }
}

/// Feeds a transcript's inbound messages to a fresh session seeded from the
/// recorded opening (model snapshot, pose, seed) and collects the outbound
/// lines it produces next to the recorded ones.
pub fn replay(
    transcript: &str,
    worlds: &BTreeMap<String, Arc<WorldMap>>,
    settings: &SessionSettings,
) -> Result<Replay, ReplayError> {
    let mut messages = Vec::new();
    for (i, line) in transcript.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let m = BridgeMessage::from_line(line).map_err(|source| ReplayError::Parse { line: i + 1, source })?;
        messages.push(m);
    }
    let (open, model, pose) = opening_of(&messages).ok_or(ReplayError::NoOpening)?;
    let world = worlds
        .get(&open.world)
        .ok_or_else(|| ReplayError::UnknownWorld(open.world.clone()))?
        .clone();
    let mut session = Session::new(
        messages[0].session.clone(),
        open.world.clone(),
        world,
        pose,
        model,
        open.seed,
        settings.clone(),
    )
    .map_err(|e| ReplayError::BadStart(e.to_string()))?;
    let mut replayed = Vec::new();
    for m in &messages {
        let out = match &m.body {
            Body::Open(_) => {
                session.record_inbound(m.body.clone());
                session.opening()
            }
            Body::Utterance(u) => session.handle_utterance(&u.text),
            Body::Close(_) => {
                session.record_inbound(m.body.clone());
                session.closing()
            }
            _ => continue,
        };
        replayed.extend(out.iter().map(BridgeMessage::to_line));
    }
    let recorded = messages
        .iter()
        .filter(|m| !m.body.is_inbound())
        .map(BridgeMessage::to_line)
        .collect();
    Ok(Replay { recorded, replayed })
}

fn opening_of(messages: &[BridgeMessage]) -> Option<(&OpenPayload, PreferenceModel, Pose)> {
    let Body::Open(open) = &messages.first()?.body else {
        return None;
    };
    let Body::Status(status) = &messages.get(1)?.body else {
        return None;
    };
    let model = status.model.as_ref()?.to_model()?;
    let Body::MapUpdate(map) = &messages.get(2)?.body else {
        return None;
    };
    Some((open, model, map.pose.to_pose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::UtterancePayload;

    fn bridge(dir: &std::path::Path) -> Bridge {
        let world = Arc::new(waypref_core::load_world(include_str!("../../../data/worlds/office.world")).unwrap());
        Bridge::new(
            BTreeMap::from([("office".to_string(), world)]),
            ModelStore::new(dir.join("models")),
            Some(dir.join("transcripts")),
            SessionSettings::default(),
            LearnerConfig::default(),
        )
    }

    fn line(session: &str, seq: u64, body: Body) -> String {
        BridgeMessage::new(session, seq, body).to_line()
    }

    fn say(session: &str, seq: u64, text: &str) -> String {
        line(session, seq, Body::Utterance(UtterancePayload { text: text.into() }))
    }

    fn open(session: &str, user: &str) -> String {
        line(
            session,
            0,
            Body::Open(OpenPayload {
                user: user.into(),
                world: "office".into(),
                seed: 7,
            }),
        )
    }

    fn kinds(lines: &[String]) -> Vec<String> {
        lines
            .iter()
            .map(|l| BridgeMessage::from_line(l).unwrap().body.kind().to_string())
            .collect()
    }

    #[test]
    fn first_message_must_open() {
        let dir = tempfile::tempdir().unwrap();
        let b = bridge(dir.path());
        let mut c = Connection::new(&b);
        assert_eq!(kinds(&c.receive(&say("s1", 0, "Go to the doorway"))), ["error"]);
        assert_eq!(kinds(&c.receive("not json")), ["error"]);
        assert_eq!(kinds(&c.receive(&open("s1", "ada"))), ["status", "map_update"]);
    }

    #[test]
    fn duplicate_sessions_and_busy_users_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let b = bridge(dir.path());
        let mut c1 = Connection::new(&b);
        c1.receive(&open("s1", "ada"));
        let mut c2 = Connection::new(&b);
        let r = c2.receive(&open("s1", "bob"));
        assert!(r[0].contains("duplicate_session"), "{r:?}");
        let r = c2.receive(&open("s2", "ada"));
        assert!(r[0].contains("\"busy\""), "{r:?}");
        c1.finish().unwrap();
        assert_eq!(kinds(&c2.receive(&open("s2", "ada"))), ["status", "map_update"]);
    }

    #[test]
    fn sequence_gaps_are_rejected_without_state_change() {
        let dir = tempfile::tempdir().unwrap();
        let b = bridge(dir.path());
        let mut c = Connection::new(&b);
        c.receive(&open("s1", "ada"));
        let r = c.receive(&say("s1", 5, "Go to the doorway"));
        assert!(r[0].contains("bad_seq"));
        let r = c.receive(&say("s1", 1, "Go to the doorway"));
        assert_eq!(kinds(&r), ["executed", "map_update"]);
    }

    #[test]
    fn transcripts_grow_while_the_session_runs() {
        let dir = tempfile::tempdir().unwrap();
        let b = bridge(dir.path());
        let path = dir.path().join("transcripts/s1.log");
        let mut c = Connection::new(&b);
        c.receive(&open("s1", "ada"));
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 3);
        c.receive(&say("s1", 9, "Go to the doorway"));
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 3);
        c.receive(&say("s1", 1, "Go to the doorway"));
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 6);
        c.finish().unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 6);
    }

    #[test]
    fn close_persists_model_and_transcript_and_replays() {
        let dir = tempfile::tempdir().unwrap();
        let b = bridge(dir.path());
        let input = [
            open("s1", "ada"),
            say("s1", 1, "Go to the doorway"),
            say("s1", 2, "No, robot turn 15 degrees to the right"),
            say("s1", 3, "Yes, robot go into the lab next"),
            say("s1", 4, "Yes"),
            line("s1", 5, Body::Close(Default::default())),
        ]
        .join("\n");
        let mut out = Vec::new();
        b.handle(input.as_bytes(), &mut out).unwrap();
        let out = String::from_utf8(out).unwrap();
        let last = out.lines().last().unwrap();
        assert!(last.contains("\"metrics\""), "{last}");
        let saved = crate::store::load_model(&dir.path().join("models"), "ada").unwrap();
        assert_eq!(saved.update_count, 3);
        let transcript = fs::read_to_string(dir.path().join("transcripts/s1.log")).unwrap();
        let r = replay(&transcript, &b.worlds, &SessionSettings::default()).unwrap();
        assert!(r.matches(), "mismatch at {:?}", r.first_mismatch());
        assert_eq!(r.recorded.join("\n"), out.trim_end());
    }
}
