use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio_tungstenite::tungstenite::Message as WsMessage;

use super::bot::{Bot, POSE_RATE_HZ};
use super::script::BotSpec;
use super::HarnessError;
use crate::protocol::{decode_bytes, encode, Message};
use crate::session::UserId;

/// Time the bot lingers after its script ends before leaving.
const LINGER_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LiveReport {
    pub user_id: Option<UserId>,
    /// Wrapped offset this bot ended with.
    pub final_rho: f64,
    pub received: u64,
}

fn live_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Live(e.to_string())
}

/// Runs one scripted bot against a live server at `addr` (host:port) until
/// its script finishes, the server closes, or `max_duration` passes.
pub fn run_live_bot(addr: &str, spec: BotSpec, seed: u64, max_duration: Option<f64>) -> Result<LiveReport, HarnessError> {
    spec.validate()?;
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(live_err)?;
    rt.block_on(run(addr, spec, seed, max_duration))
}

async fn run(addr: &str, spec: BotSpec, seed: u64, max_duration: Option<f64>) -> Result<LiveReport, HarnessError> {
    let url = format!("ws://{addr}/");
    let (ws, _) = tokio_tungstenite::connect_async(url.as_str()).await.map_err(live_err)?;
    info!("{} connected to {url}", spec.name);
    let (mut sink, mut source) = ws.split();
    let phase = ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..1.0) / POSE_RATE_HZ;
    let mut bot = Bot::new(spec, phase, true);
    let epoch = Instant::now();
    let now = || epoch.elapsed().as_secs_f64();
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / 60.0));
    let mut done_at: Option<f64> = None;
    let mut received = 0u64;

    loop {
        let outgoing = tokio::select! {
            frame = source.next() => match frame {
                Some(Ok(WsMessage::Text(text))) => {
                    received += 1;
                    bot.on_message(decode_bytes(text.as_bytes())?, now())?
                }
                Some(Ok(WsMessage::Binary(bytes))) => {
                    received += 1;
                    bot.on_message(decode_bytes(&bytes)?, now())?
                }
                Some(Ok(WsMessage::Close(_))) | None => {
                    debug!("server closed the connection");
                    break;
                }
                Some(Ok(_)) => Vec::new(),
                Some(Err(e)) => return Err(live_err(e)),
            },
            _ = ticker.tick() => {
                let t = now();
                if max_duration.is_some_and(|m| t >= m) {
                    break;
                }
                if bot.is_done() {
                    let since = *done_at.get_or_insert(t);
                    if t - since >= LINGER_S {
                        break;
                    }
                }
                bot.step(t)?
            }
        };
        for msg in outgoing {
            sink.send(WsMessage::text(encode(&msg)?)).await.map_err(live_err)?;
        }
    }
    if let Ok(text) = encode(&Message::Leave) {
        let _ = sink.send(WsMessage::text(text)).await;
    }
    let _ = sink.close().await;
    Ok(LiveReport {
        user_id: bot.user_id(),
        final_rho: bot.replica().map_or(0.0, |r| crate::geom::Angle::new(r.my_rho()).radians()),
        received,
    })
}
