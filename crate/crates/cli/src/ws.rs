//! WebSocket transport for the teleop protocol: each text frame carries one
//! message, in the same JSON form as the line transport.

use std::net::{TcpListener, TcpStream};
use std::thread;

use anyhow::Result;
use log::{info, warn};
use quadshape::teleop::wire::{decode, encode};
use quadshape::{Mode, Session, SessionAssets, WireMessage};
use tungstenite::{accept, Message};

fn connection(stream: TcpStream, assets: SessionAssets, mode: Mode) -> Result<()> {
    stream.set_nodelay(true)?;
    let mut ws = accept(stream)?;
    let mut session = Session::new(assets, mode);
    loop {
        let replies = match ws.read()? {
            Message::Text(t) => match decode(t.as_str()) {
                Ok(msg) => session.handle(msg),
                Err(e) => vec![WireMessage::Error { text: e.to_string() }],
            },
            Message::Close(_) => return Ok(()),
            _ => continue,
        };
        for r in &replies {
            ws.send(Message::text(encode(r)))?;
        }
    }
}

pub fn serve(listener: TcpListener, assets: SessionAssets, mode: Mode) -> Result<()> {
    info!("websocket listening on {}", listener.local_addr()?);
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
            info!("websocket session from {peer}");
            if let Err(e) = connection(stream, assets, mode) {
                warn!("websocket session {peer} ended: {e}");
            }
        });
    }
    Ok(())
}
