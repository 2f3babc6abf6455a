use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use log::{info, warn};

use super::wire::{self, WireMessage};
use super::{Mode, Session, SessionAssets};
use crate::error::Result;

/// Runs one session over a line-oriented stream until the peer closes it.
pub fn run_session<R: BufRead, W: Write>(reader: R, mut writer: W, mut session: Session) -> Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let replies = match wire::decode(&line) {
            Ok(msg) => session.handle(msg),
            Err(e) => vec![WireMessage::Error { text: e.to_string() }],
        };
        for r in &replies {
            writeln!(writer, "{}", wire::encode(r))?;
        }
        writer.flush()?;
    }
    Ok(())
}

fn connection(stream: TcpStream, assets: SessionAssets, mode: Mode) -> Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    run_session(reader, stream, Session::new(assets, mode))
}

/// Accepts connections forever; each gets a fresh session on its own thread.
pub fn serve(listener: TcpListener, assets: SessionAssets, mode: Mode) -> Result<()> {
    info!("listening on {}", listener.local_addr()?);
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
        let assets = assets.clone();
        thread::spawn(move || {
            info!("session from {peer}");
            if let Err(e) = connection(stream, assets, mode) {
                warn!("session {peer} ended: {e}");
            }
        });
    }
    Ok(())
}
