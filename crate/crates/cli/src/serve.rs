//! `serve`: the live teleoperation service.
//!
//! One task owns the world and steps it in real time. Client connections
//! run on their own tasks; they forward validated commands to the
//! simulation over a channel and relay broadcast snapshots and events.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use safestop_core::trajectory::TrajectoryKind;
use safestop_sim::{Mode, OperatorCommand, World, WorldEvent};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, watch};

use crate::config::{ConfigError, RunConfig};
use crate::protocol::{
    ClientMessage, ClientValidator, EventKind, EventNotice, Hello, ServerEnvelope, ServerMessage, Snapshot, PROTO,
};

pub const SNAPSHOT_RATE: f64 = 20.0;
/// Latest command is held this long, then replaced by zero.
pub const COMMAND_HOLD: f64 = 0.5;
pub const MAX_SNAPSHOT_OBSTACLES: usize = 50;
/// Spacing of stop-trajectory samples sent to clients, seconds.
const TRAJECTORY_SAMPLE_DT: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Shared {
    hello: Hello,
    updates: broadcast::Sender<Arc<ServerMessage>>,
    inputs: mpsc::UnboundedSender<ClientMessage>,
}

/// Serve until `shutdown` resolves.
pub async fn serve(
    cfg: &RunConfig,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let spec = cfg.resolve()?;
    let scenario = spec
        .scenario(cfg.seed)
        .map_err(|e| ServeError::Scenario(e.to_string()))?;
    let map = scenario.build_map().map_err(|e| ServeError::Scenario(e.to_string()))?;
    let monitoring = cfg.monitoring.modes().contains(&true);
    let world = World::new(scenario.clone(), map, cfg.sim.clone(), monitoring, cfg.seed)
        .map_err(|e| ServeError::Scenario(e.to_string()))?;

    let (updates, _) = broadcast::channel(256);
    let (inputs, input_rx) = mpsc::unbounded_channel();
    let shared = Arc::new(Shared {
        hello: Hello {
            scenario,
            dt: world.dt(),
            snapshot_rate: SNAPSHOT_RATE,
            beta: cfg.sim.monitor.beta,
            command_hold: COMMAND_HOLD,
        },
        updates: updates.clone(),
        inputs,
    });

    let (stop_tx, stop_rx) = watch::channel(false);
    let sim = tokio::spawn(simulate(world, input_rx, updates, stop_rx.clone()));
    let app = Router::new().route("/ws", get(upgrade)).with_state(shared);
    tracing::info!(addr = %listener.local_addr()?, "serving");
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            shutdown.await;
            let _ = stop_tx.send(true);
        })
        .await;
    let _ = sim.await;
    result.map_err(ServeError::Io)
}

/// Bind `addr` and serve in the background; returns the bound address and
/// a handle that stops the service when dropped or triggered.
pub async fn spawn(cfg: RunConfig, addr: SocketAddr) -> Result<ServeHandle, ServeError> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    cfg.resolve()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        serve(&cfg, listener, async {
            let _ = rx.await;
        })
        .await
    });
    Ok(ServeHandle {
        addr: local,
        stop: Some(tx),
        task,
    })
}

pub struct ServeHandle {
    pub addr: SocketAddr,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<Result<(), ServeError>>,
}

impl ServeHandle {
    pub async fn shutdown(mut self) -> Result<(), ServeError> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        match (&mut self.task).await {
            Ok(r) => r,
            Err(e) => Err(ServeError::Io(std::io::Error::other(e))),
        }
    }
}

impl Drop for ServeHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
    }
}

async fn simulate(
    mut world: World,
    mut inputs: mpsc::UnboundedReceiver<ClientMessage>,
    updates: broadcast::Sender<Arc<ServerMessage>>,
    mut stop: watch::Receiver<bool>,
) {
    let dt = world.dt();
    let snapshot_every = ((1.0 / (SNAPSHOT_RATE * dt)).round() as u64).max(1);
    let hold_ticks = (COMMAND_HOLD / dt).round() as u64;
    let mut interval = tokio::time::interval(Duration::from_secs_f64(dt));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let mut tick: u64 = 0;
    let mut latest: Option<(OperatorCommand, u64)> = None;
    let send = |m: ServerMessage| {
        // no receivers is fine
        let _ = updates.send(Arc::new(m));
    };

    loop {
        tokio::select! {
            _ = interval.tick() => {}
            _ = stop.changed() => break,
        }
        tick += 1;
        while let Ok(msg) = inputs.try_recv() {
            match msg {
                ClientMessage::Command {
                    commanded_velocity,
                    commanded_yaw_rate,
                    timestamp,
                } => {
                    latest = Some((
                        OperatorCommand {
                            commanded_velocity,
                            commanded_yaw_rate,
                            timestamp,
                        },
                        tick,
                    ));
                }
                ClientMessage::Reset => {
                    world.reset();
                    latest = None;
                    tracing::info!("reset");
                    send(ServerMessage::Event(EventNotice::new(
                        world.time,
                        EventKind::Reset,
                        world.state.position,
                    )));
                }
                ClientMessage::ToggleMonitoring => {
                    world.monitoring_enabled = !world.monitoring_enabled;
                    tracing::info!(enabled = world.monitoring_enabled, "monitoring toggled");
                    let mut e = EventNotice::new(world.time, EventKind::MonitoringToggled, world.state.position);
                    e.monitoring_enabled = Some(world.monitoring_enabled);
                    send(ServerMessage::Event(e));
                }
            }
        }

        if !world.finished() {
            let cmd = match latest {
                Some((c, at)) if tick - at <= hold_ticks => c,
                _ => OperatorCommand::zero(world.time),
            };
            let (events, _) = world.step(&cmd);
            for e in events {
                if let Some(notice) = notice_for(&world, &e) {
                    tracing::info!(event = ?notice.event, t = notice.t, "event");
                    send(ServerMessage::Event(notice));
                }
            }
        }
        if tick.is_multiple_of(snapshot_every) {
            send(ServerMessage::Snapshot(snapshot(&world)));
        }
    }
}

fn notice_for(world: &World, e: &WorldEvent) -> Option<EventNotice> {
    Some(match e {
        WorldEvent::Stop(s) => {
            let kind = match s.kind {
                TrajectoryKind::Polynomial => EventKind::Stop,
                TrajectoryKind::FallbackBrake => EventKind::StopFallback,
            };
            let mut n = EventNotice::new(s.time, kind, s.position);
            n.speed = Some(s.speed);
            n.obstacle_distance = Some(s.obstacle_distance).filter(|d| d.is_finite());
            n.obstacle_angle = Some(s.obstacle_angle).filter(|a| a.is_finite());
            n.stop_cost = Some(s.cost).filter(|c| c.is_finite());
            n.trajectory = world
                .active_stop
                .as_ref()
                .map(|a| a.trajectory.samples(TRAJECTORY_SAMPLE_DT));
            n
        }
        WorldEvent::Collision {
            time,
            position,
            distance,
        } => {
            let mut n = EventNotice::new(*time, EventKind::Collision, *position);
            n.obstacle_distance = Some(*distance);
            n
        }
        WorldEvent::GoalReached { time } => EventNotice::new(*time, EventKind::Goal, world.state.position),
        WorldEvent::ModeChange { .. } => return None,
    })
}

fn snapshot(world: &World) -> Snapshot {
    let nearest = world
        .map
        .k_nearest(
            &world.state.position,
            MAX_SNAPSHOT_OBSTACLES,
            world.config.monitor.query_radius,
        )
        .into_iter()
        .map(|n| n.point)
        .collect();
    let stop_trajectory = match (&world.active_stop, world.mode) {
        (Some(a), Mode::Stopping) => {
            let elapsed = world.time - a.started;
            Some(
                a.trajectory
                    .samples(TRAJECTORY_SAMPLE_DT)
                    .into_iter()
                    .filter(|s| s.t >= elapsed)
                    .collect(),
            )
        }
        _ => None,
    };
    Snapshot {
        t: world.time,
        state: world.state,
        mode: world.mode,
        monitoring_enabled: world.monitoring_enabled,
        stop_cost_min: world.last_stop_cost(),
        nearest_obstacles: nearest,
        stop_trajectory,
        collided: world.collided,
        goal_reached: world.goal_reached,
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, shared))
}

async fn connection(socket: WebSocket, shared: Arc<Shared>) {
    let (mut sink, mut stream) = socket.split();
    let mut updates = shared.updates.subscribe();
    let mut seq: u64 = 0;
    let mut stamp = |message: ServerMessage| {
        seq += 1;
        let env = ServerEnvelope {
            proto: PROTO,
            seq,
            message,
        };
        Message::Text(serde_json::to_string(&env).expect("server messages serialize").into())
    };
    tracing::debug!("client connected");
    if sink
        .send(stamp(ServerMessage::Hello(shared.hello.clone())))
        .await
        .is_err()
    {
        return;
    }
    let mut validator = ClientValidator::default();
    loop {
        tokio::select! {
            update = updates.recv() => match update {
                Ok(m) => {
                    if sink.send(stamp((*m).clone())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    tracing::warn!(skipped = n, "slow client, dropping updates");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = stream.next() => {
                let violation = match incoming {
                    Some(Ok(Message::Text(text))) => match validator.accept(text.as_str()) {
                        Ok(msg) => {
                            let _ = shared.inputs.send(msg);
                            None
                        }
                        Err(v) => Some(v),
                    },
                    Some(Ok(Message::Binary(_))) => Some(crate::protocol::ProtocolViolation::Binary),
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => None,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                };
                if let Some(v) = violation {
                    tracing::warn!(error = %v, "protocol violation, closing connection");
                    let _ = sink.send(stamp(ServerMessage::Error { message: v.to_string() })).await;
                    let _ = sink
                        .send(Message::Close(Some(CloseFrame { code: 1002, reason: "protocol violation".into() })))
                        .await;
                    break;
                }
            }
        }
    }
    tracing::debug!("client disconnected");
}
