//! Per-agent mission executive: command lists parse into a nested
//! finite-state automaton that is ticked once per simulated second.
//!
//! The executive owns sequencing only. Everything a behavior needs from the
//! rest of the agent (planning, motion, task market, sync state) comes
//! through [`AgentServices`], so behaviors stay testable against mocks and
//! the simulation wires in the real subsystems.

use std::fmt;

use crate::geom::Point2;
use crate::types::TaskId;

/// Success radius for goto goals, meters.
pub const ARRIVE_RADIUS: f64 = 0.5;

/// Waypoints closer than this are considered passed, meters.
const WAYPOINT_RADIUS: f64 = 0.3;

/// Ticks without measurable movement before goto declares failure.
const STUCK_TICKS: u32 = 3;

/// Movement below this between ticks counts as no progress, meters.
const PROGRESS_EPS: f64 = 0.05;

/// How far drop-comms-node retreats from the deployed node, meters.
const RETREAT_DIST: f64 = 1.0;

/// What the executive asks of the rest of the agent.
pub trait AgentServices {
    fn position(&self) -> Point2;
    /// Global route to the goal as waypoints, None when unreachable.
    fn plan(&mut self, goal: Point2) -> Option<Vec<Point2>>;
    /// Sets this tick's motion target; the world integrates between ticks.
    fn steer(&mut self, waypoint: Point2);
    /// Deploys a comms node at the current position.
    fn drop_comms_node(&mut self);
    /// Bytes of locally-held data the base has not yet received.
    fn unsynced_to_base(&self) -> u64;
    /// Where sync should head: the base or a relay that reaches it.
    fn sync_target(&self) -> Point2;
    /// Bids on and selects the next exploration task to pursue.
    fn next_explore_task(&mut self) -> Option<(TaskId, Point2)>;
    /// Whether any exploration task could still be bid on later.
    fn explore_tasks_remain(&self) -> bool;
    /// Whether the frontier behind the task has been culled.
    fn frontier_done(&self, id: TaskId) -> bool;
    fn mark_task_complete(&mut self, id: TaskId);
    fn report_task_failure(&mut self, id: TaskId);
    /// Spawns the carried UAV; false when none is carried.
    fn spawn_uav(&mut self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Succeeded,
    Failed,
}

/// Parse failure with the 1-based source position of the offending token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

/// One parsed behavior invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub name: String,
    pub args: Vec<f64>,
    pub line: usize,
    pub col: usize,
}

/// Ordered behavior invocations; the unit operators send to agents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandList {
    pub commands: Vec<Command>,
}

struct Token {
    text: String,
    line: usize,
    col: usize,
}

/// Splits semicolon-separated commands into whitespace-delimited tokens,
/// remembering where each token started.
fn tokenize(text: &str) -> Vec<Vec<Token>> {
    let mut segments = vec![Vec::new()];
    let mut line = 1;
    let mut col = 1;
    let mut current: Option<Token> = None;
    for ch in text.chars() {
        if ch == ';' || ch.is_whitespace() {
            if let Some(tok) = current.take() {
                segments.last_mut().unwrap().push(tok);
            }
            if ch == ';' {
                segments.push(Vec::new());
            }
        } else {
            current
                .get_or_insert(Token {
                    text: String::new(),
                    line,
                    col,
                })
                .text
                .push(ch);
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    if let Some(tok) = current.take() {
        segments.last_mut().unwrap().push(tok);
    }
    segments
}

/// Parses command-list text. The whole list is rejected on the first
/// unknown behavior, bad argument count, or non-numeric argument.
pub fn parse_commands(text: &str) -> Result<CommandList, ParseError> {
    let mut commands = Vec::new();
    for tokens in tokenize(text) {
        let Some(name_tok) = tokens.first() else { continue };
        let mut args = Vec::new();
        for tok in &tokens[1..] {
            let v: f64 = tok.text.parse().map_err(|_| ParseError {
                line: tok.line,
                col: tok.col,
                message: format!("expected a number, found `{}`", tok.text),
            })?;
            args.push(v);
        }
        let arity_ok = match name_tok.text.as_str() {
            "goto" => args.len() == 2,
            "explore" | "sync" | "launch-uav" => args.is_empty(),
            "drop-comms-node" => args.is_empty() || args.len() == 2,
            other => {
                return Err(ParseError {
                    line: name_tok.line,
                    col: name_tok.col,
                    message: format!("unknown behavior `{other}`"),
                })
            }
        };
        if !arity_ok {
            return Err(ParseError {
                line: name_tok.line,
                col: name_tok.col,
                message: format!(
                    "wrong number of arguments for `{}` (got {})",
                    name_tok.text,
                    args.len()
                ),
            });
        }
        commands.push(Command {
            name: name_tok.text.clone(),
            args,
            line: name_tok.line,
            col: name_tok.col,
        });
    }
    Ok(CommandList { commands })
}

/// Parses text straight to an executable FSA.
pub fn parse(text: &str) -> Result<Fsa, ParseError> {
    Ok(Fsa::from_commands(&parse_commands(text)?))
}

/// Waypoint-following navigation toward a fixed goal. A goal of None
/// resolves to wherever the agent stands on its first tick.
#[derive(Debug, Clone)]
struct Goto {
    goal: Option<Point2>,
    route: Option<Vec<Point2>>,
    last_pos: Option<Point2>,
    stuck: u32,
}

impl Goto {
    fn new(goal: Option<Point2>) -> Self {
        Goto {
            goal,
            route: None,
            last_pos: None,
            stuck: 0,
        }
    }

    fn tick(&mut self, ctx: &mut dyn AgentServices) -> Status {
        let pos = ctx.position();
        let goal = *self.goal.get_or_insert(pos);
        if pos.dist(goal) <= ARRIVE_RADIUS {
            return Status::Succeeded;
        }
        if self.route.is_none() {
            match ctx.plan(goal) {
                Some(waypoints) => self.route = Some(waypoints),
                None => return Status::Failed,
            }
        }
        let route = self.route.as_mut().unwrap();
        while route.first().map_or(false, |w| pos.dist(*w) <= WAYPOINT_RADIUS) {
            route.remove(0);
        }
        match route.first() {
            Some(&next) => ctx.steer(next),
            None => {
                // Out of waypoints without arriving: replan next tick.
                self.route = None;
                return Status::Running;
            }
        }
        if self.last_pos.map_or(false, |lp| pos.dist(lp) < PROGRESS_EPS) {
            self.stuck += 1;
        } else {
            self.stuck = 0;
        }
        self.last_pos = Some(pos);
        if self.stuck >= STUCK_TICKS {
            return Status::Failed;
        }
        Status::Running
    }
}

/// Pursues exploration tasks from the market until none can be bid on.
#[derive(Debug, Clone, Default)]
struct Explore {
    current: Option<(TaskId, Goto)>,
}

impl Explore {
    fn tick(&mut self, ctx: &mut dyn AgentServices) -> Status {
        let Some((id, nav)) = self.current.as_mut() else {
            return match ctx.next_explore_task() {
                Some((id, at)) => {
                    self.current = Some((id, Goto::new(Some(at))));
                    Status::Running
                }
                None if ctx.explore_tasks_remain() => Status::Running,
                None => Status::Succeeded,
            };
        };
        let id = *id;
        if ctx.frontier_done(id) {
            ctx.mark_task_complete(id);
            self.current = None;
            return Status::Running;
        }
        match nav.tick(ctx) {
            Status::Succeeded => {
                ctx.mark_task_complete(id);
                self.current = None;
            }
            Status::Failed => {
                ctx.report_task_failure(id);
                self.current = None;
            }
            Status::Running => {}
        }
        Status::Running
    }
}

/// Heads toward the base (or a relay that reaches it) until everything
/// this agent holds has been delivered. Never falsely succeeds; planning
/// failures are retried instead of failing the list.
#[derive(Debug, Clone, Default)]
struct Sync {
    nav: Option<Goto>,
}

impl Sync {
    fn tick(&mut self, ctx: &mut dyn AgentServices) -> Status {
        if ctx.unsynced_to_base() == 0 {
            return Status::Succeeded;
        }
        let target = ctx.sync_target();
        let stale = self
            .nav
            .as_ref()
            .and_then(|n| n.goal)
            .map_or(true, |g| g.dist(target) > ARRIVE_RADIUS);
        if stale {
            self.nav = Some(Goto::new(Some(target)));
        }
        match self.nav.as_mut().unwrap().tick(ctx) {
            Status::Running => {}
            // Arrived (wait for delivery) or failed (retry from scratch).
            Status::Succeeded | Status::Failed => self.nav = None,
        }
        Status::Running
    }
}

/// Moves away from a recorded spot until clear of it.
#[derive(Debug, Clone, Default)]
struct Retreat {
    node: Option<Point2>,
}

impl Retreat {
    fn tick(&mut self, ctx: &mut dyn AgentServices) -> Status {
        let pos = ctx.position();
        let node = *self.node.get_or_insert(pos);
        if pos.dist(node) >= RETREAT_DIST {
            return Status::Succeeded;
        }
        let dir = if pos.dist(node) < 1e-9 {
            Point2::new(1.0, 0.0)
        } else {
            let d = pos.dist(node);
            Point2::new((pos.x - node.x) / d, (pos.y - node.y) / d)
        };
        ctx.steer(Point2::new(
            node.x + dir.x * (RETREAT_DIST + 0.5),
            node.y + dir.y * (RETREAT_DIST + 0.5),
        ));
        Status::Running
    }
}

#[derive(Debug, Clone)]
enum State {
    Goto(Goto),
    Explore(Explore),
    Sync(Sync),
    LaunchUav,
    Actuate,
    Retreat(Retreat),
    Nested(Box<Fsa>),
}

impl State {
    fn tick(&mut self, ctx: &mut dyn AgentServices) -> Status {
        match self {
            State::Goto(b) => b.tick(ctx),
            State::Explore(b) => b.tick(ctx),
            State::Sync(b) => b.tick(ctx),
            State::LaunchUav => {
                if ctx.spawn_uav() {
                    Status::Succeeded
                } else {
                    Status::Failed
                }
            }
            State::Actuate => {
                ctx.drop_comms_node();
                Status::Succeeded
            }
            State::Retreat(b) => b.tick(ctx),
            State::Nested(f) => f.tick(ctx),
        }
    }

    fn describe(&self) -> String {
        match self {
            State::Goto(_) => "goto".into(),
            State::Explore(_) => "explore".into(),
            State::Sync(_) => "sync".into(),
            State::LaunchUav => "launch-uav".into(),
            State::Actuate => "actuate".into(),
            State::Retreat(_) => "retreat".into(),
            State::Nested(f) => format!("[{}]", f.describe()),
        }
    }
}

/// Sequence automaton over behavior states. At most one transition per
/// tick: a child's success consumes the tick unless it was the last child.
#[derive(Debug, Clone)]
pub struct Fsa {
    states: Vec<State>,
    current: usize,
    status: Status,
    /// State exits so far; equals entries of successor states.
    pub transitions: u32,
}

impl Fsa {
    fn from_states(states: Vec<State>) -> Self {
        Fsa {
            states,
            current: 0,
            status: Status::Running,
            transitions: 0,
        }
    }

    pub fn from_commands(list: &CommandList) -> Self {
        let states = list
            .commands
            .iter()
            .map(|cmd| match cmd.name.as_str() {
                "goto" => State::Goto(Goto::new(Some(Point2::new(cmd.args[0], cmd.args[1])))),
                "explore" => State::Explore(Explore::default()),
                "sync" => State::Sync(Sync::default()),
                "launch-uav" => State::LaunchUav,
                "drop-comms-node" => {
                    let goal = (cmd.args.len() == 2)
                        .then(|| Point2::new(cmd.args[0], cmd.args[1]));
                    State::Nested(Box::new(Fsa::from_states(vec![
                        State::Goto(Goto::new(goal)),
                        State::Actuate,
                        State::Retreat(Retreat::default()),
                    ])))
                }
                other => unreachable!("parser admitted `{other}`"),
            })
            .collect();
        Fsa::from_states(states)
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Human-readable state list, nested FSAs in brackets.
    pub fn describe(&self) -> String {
        self.states
            .iter()
            .map(State::describe)
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Runs one 1 Hz tick. Once the automaton has left Running it never
    /// touches the context again.
    pub fn tick(&mut self, ctx: &mut dyn AgentServices) -> Status {
        if self.status != Status::Running {
            return self.status;
        }
        if self.current >= self.states.len() {
            self.status = Status::Succeeded;
            return self.status;
        }
        match self.states[self.current].tick(ctx) {
            Status::Running => {}
            Status::Failed => self.status = Status::Failed,
            Status::Succeeded => {
                self.current += 1;
                self.transitions += 1;
                if self.current >= self.states.len() {
                    self.status = Status::Succeeded;
                }
            }
        }
        self.status
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::AgentId;
    use std::collections::VecDeque;

    /// Free-space agent mock: steering moves the position by up to `speed`
    /// meters per tick (applied by `advance`, like the world integrating
    /// between executive ticks).
    struct Mock {
        pos: Point2,
        speed: f64,
        frozen: bool,
        target: Option<Point2>,
        plan_ok: bool,
        dropped: Vec<Point2>,
        unsynced: u64,
        sync_at: Point2,
        deliver_radius: f64,
        tasks: VecDeque<(TaskId, Point2)>,
        remain: bool,
        completed: Vec<TaskId>,
        failed: Vec<TaskId>,
        carries_uav: bool,
        calls: u32,
    }

    impl Mock {
        fn new() -> Self {
            Mock {
                pos: Point2::new(0.0, 0.0),
                speed: 1.0,
                frozen: false,
                target: None,
                plan_ok: true,
                dropped: Vec::new(),
                unsynced: 0,
                sync_at: Point2::new(0.0, 0.0),
                deliver_radius: 1.0,
                tasks: VecDeque::new(),
                remain: false,
                completed: Vec::new(),
                failed: Vec::new(),
                carries_uav: false,
                calls: 0,
            }
        }

        /// Integrates one second of motion and sync progress.
        fn advance(&mut self) {
            if let Some(t) = self.target.take() {
                if !self.frozen {
                    let d = self.pos.dist(t);
                    if d <= self.speed {
                        self.pos = t;
                    } else {
                        self.pos = Point2::new(
                            self.pos.x + (t.x - self.pos.x) / d * self.speed,
                            self.pos.y + (t.y - self.pos.y) / d * self.speed,
                        );
                    }
                }
            }
            if self.unsynced > 0 && self.pos.dist(self.sync_at) <= self.deliver_radius {
                self.unsynced = 0;
            }
        }
    }

    impl AgentServices for Mock {
        fn position(&self) -> Point2 {
            self.pos
        }
        fn plan(&mut self, goal: Point2) -> Option<Vec<Point2>> {
            self.calls += 1;
            self.plan_ok.then(|| vec![goal])
        }
        fn steer(&mut self, waypoint: Point2) {
            self.calls += 1;
            self.target = Some(waypoint);
        }
        fn drop_comms_node(&mut self) {
            self.calls += 1;
            self.dropped.push(self.pos);
        }
        fn unsynced_to_base(&self) -> u64 {
            self.unsynced
        }
        fn sync_target(&self) -> Point2 {
            self.sync_at
        }
        fn next_explore_task(&mut self) -> Option<(TaskId, Point2)> {
            self.calls += 1;
            self.tasks.pop_front()
        }
        fn explore_tasks_remain(&self) -> bool {
            self.remain
        }
        fn frontier_done(&self, _id: TaskId) -> bool {
            false
        }
        fn mark_task_complete(&mut self, id: TaskId) {
            self.completed.push(id);
        }
        fn report_task_failure(&mut self, id: TaskId) {
            self.failed.push(id);
        }
        fn spawn_uav(&mut self) -> bool {
            self.calls += 1;
            self.carries_uav
        }
    }

    fn run(fsa: &mut Fsa, ctx: &mut Mock, max_ticks: usize) -> (Status, usize) {
        for i in 0..max_ticks {
            let s = fsa.tick(ctx);
            ctx.advance();
            if s != Status::Running {
                return (s, i + 1);
            }
        }
        (Status::Running, max_ticks)
    }

    fn task(seq: u32) -> TaskId {
        TaskId {
            agent: AgentId(9),
            seq,
        }
    }

    #[test]
    fn parses_nested_drop_composition() {
        let fsa = parse("goto 10 5; drop-comms-node; explore").unwrap();
        assert_eq!(fsa.len(), 3);
        assert_eq!(fsa.describe(), "goto; [goto; actuate; retreat]; explore");
    }

    #[test]
    fn empty_list_succeeds_immediately() {
        let mut fsa = parse("").unwrap();
        let mut ctx = Mock::new();
        assert_eq!(fsa.tick(&mut ctx), Status::Succeeded);
    }

    #[test]
    fn unknown_behavior_reports_position() {
        let err = parse("goto 1 2; fly-to-moon 3").unwrap_err();
        assert_eq!((err.line, err.col), (1, 11));
        assert!(err.message.contains("fly-to-moon"));

        let err = parse("goto 1 2;\n  fly-to-moon").unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
    }

    #[test]
    fn arity_and_number_errors_reject_the_list() {
        assert!(parse("goto 1").is_err());
        let err = parse("goto one 2").unwrap_err();
        assert_eq!((err.line, err.col), (1, 6));
        assert!(parse("explore now").is_err());
        assert!(parse("drop-comms-node 1").is_err());
    }

    #[test]
    fn one_transition_per_tick() {
        let mut fsa = parse("launch-uav; launch-uav").unwrap();
        let mut ctx = Mock::new();
        ctx.carries_uav = true;
        assert_eq!(fsa.tick(&mut ctx), Status::Running, "first tick transitions once");
        assert_eq!(fsa.tick(&mut ctx), Status::Succeeded);
        assert_eq!(fsa.transitions, 2);
    }

    #[test]
    fn failure_stops_the_list_and_the_context() {
        let mut fsa = parse("launch-uav; goto 50 0; launch-uav").unwrap();
        let mut ctx = Mock::new();
        ctx.carries_uav = true;
        ctx.plan_ok = false;
        assert_eq!(fsa.tick(&mut ctx), Status::Running);
        assert_eq!(fsa.tick(&mut ctx), Status::Failed, "unreachable goto fails");
        let calls = ctx.calls;
        for _ in 0..5 {
            assert_eq!(fsa.tick(&mut ctx), Status::Failed);
        }
        assert_eq!(ctx.calls, calls, "a failed FSA must not touch the agent");
    }

    #[test]
    fn goto_at_goal_succeeds_first_tick() {
        let mut fsa = parse("goto 0.2 0.1").unwrap();
        let mut ctx = Mock::new();
        assert_eq!(fsa.tick(&mut ctx), Status::Succeeded);
    }

    #[test]
    fn goto_travels_at_least_the_straight_line() {
        let mut fsa = parse("goto 6 0").unwrap();
        let mut ctx = Mock::new();
        let start = ctx.pos;
        let mut trail = 0.0;
        let mut prev = start;
        for _ in 0..20 {
            let s = fsa.tick(&mut ctx);
            ctx.advance();
            trail += ctx.pos.dist(prev);
            prev = ctx.pos;
            if s != Status::Running {
                assert_eq!(s, Status::Succeeded);
                break;
            }
        }
        assert!(ctx.pos.dist(Point2::new(6.0, 0.0)) <= ARRIVE_RADIUS);
        assert!(trail + 1e-9 >= start.dist(Point2::new(6.0, 0.0)) - ARRIVE_RADIUS);
    }

    #[test]
    fn goto_stuck_fails_within_a_few_ticks() {
        let mut fsa = parse("goto 6 0").unwrap();
        let mut ctx = Mock::new();
        ctx.frozen = true;
        let (status, ticks) = run(&mut fsa, &mut ctx, 10);
        assert_eq!(status, Status::Failed);
        assert!(ticks <= STUCK_TICKS as usize + 2);
    }

    #[test]
    fn explore_completes_tasks_then_succeeds() {
        let mut fsa = parse("explore").unwrap();
        let mut ctx = Mock::new();
        ctx.tasks.push_back((task(1), Point2::new(3.0, 0.0)));
        ctx.tasks.push_back((task(2), Point2::new(3.0, 3.0)));
        let (status, _) = run(&mut fsa, &mut ctx, 40);
        assert_eq!(status, Status::Succeeded);
        assert_eq!(ctx.completed, vec![task(1), task(2)]);
        assert!(ctx.failed.is_empty());
    }

    #[test]
    fn explore_with_nothing_to_do_succeeds_immediately() {
        let mut fsa = parse("explore").unwrap();
        let mut ctx = Mock::new();
        assert_eq!(fsa.tick(&mut ctx), Status::Succeeded);
    }

    #[test]
    fn explore_failure_releases_and_moves_on() {
        let mut fsa = parse("explore").unwrap();
        let mut ctx = Mock::new();
        ctx.tasks.push_back((task(1), Point2::new(5.0, 0.0)));
        ctx.frozen = true;
        let mut reported = false;
        for _ in 0..10 {
            fsa.tick(&mut ctx);
            ctx.advance();
            if !ctx.failed.is_empty() {
                reported = true;
                break;
            }
        }
        assert!(reported, "stuck navigation must report task failure");
        assert_eq!(ctx.failed, vec![task(1)]);
    }

    #[test]
    fn sync_when_synced_succeeds_first_tick() {
        let mut fsa = parse("sync").unwrap();
        let mut ctx = Mock::new();
        assert_eq!(fsa.tick(&mut ctx), Status::Succeeded);
    }

    #[test]
    fn sync_delivers_at_relay_without_reaching_base() {
        let mut fsa = parse("sync").unwrap();
        let mut ctx = Mock::new();
        ctx.unsynced = 500_000;
        ctx.sync_at = Point2::new(4.0, 0.0); // relay, not the base
        let (status, _) = run(&mut fsa, &mut ctx, 20);
        assert_eq!(status, Status::Succeeded);
        assert!(ctx.pos.dist(Point2::new(4.0, 0.0)) <= 1.5);
    }

    #[test]
    fn sync_never_false_succeeds_when_base_unreachable() {
        let mut fsa = parse("sync").unwrap();
        let mut ctx = Mock::new();
        ctx.unsynced = 500_000;
        ctx.sync_at = Point2::new(40.0, 0.0);
        ctx.plan_ok = false;
        let (status, _) = run(&mut fsa, &mut ctx, 50);
        assert_eq!(status, Status::Running, "must keep trying, not succeed or fail");
    }

    #[test]
    fn drop_comms_node_retreats_at_least_a_meter() {
        let mut fsa = parse("drop-comms-node").unwrap();
        let mut ctx = Mock::new();
        let (status, _) = run(&mut fsa, &mut ctx, 10);
        assert_eq!(status, Status::Succeeded);
        assert_eq!(ctx.dropped.len(), 1);
        assert!(ctx.pos.dist(ctx.dropped[0]) >= RETREAT_DIST);
    }

    #[test]
    fn drop_comms_node_with_goal_drops_there() {
        let mut fsa = parse("drop-comms-node 3 0").unwrap();
        let mut ctx = Mock::new();
        let (status, _) = run(&mut fsa, &mut ctx, 15);
        assert_eq!(status, Status::Succeeded);
        assert_eq!(ctx.dropped.len(), 1);
        assert!(ctx.dropped[0].dist(Point2::new(3.0, 0.0)) <= ARRIVE_RADIUS);
    }

    #[test]
    fn launch_without_uav_fails() {
        let mut fsa = parse("launch-uav").unwrap();
        let mut ctx = Mock::new();
        assert_eq!(fsa.tick(&mut ctx), Status::Failed);

        let mut fsa = parse("launch-uav").unwrap();
        ctx.carries_uav = true;
        assert_eq!(fsa.tick(&mut ctx), Status::Succeeded);
    }
}
