//! UDP echo round-trip probe and a matching echo server.

use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("probe count must be at least 1")]
    ZeroCount,
    #[error("{0} unreachable: all probes timed out")]
    Unreachable(SocketAddr),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub target: String,
    pub sent: u32,
    pub received: u32,
    pub mean_secs: f64,
    /// Population standard deviation.
    pub std_secs: f64,
}

/// Sends `count` datagrams one at a time and times each echo.
pub fn probe(target: SocketAddr, count: u32, timeout: Duration) -> Result<ProbeReport, ProbeError> {
    if count == 0 {
        return Err(ProbeError::ZeroCount);
    }
    let bind: SocketAddr = if target.is_ipv4() { ([0, 0, 0, 0], 0).into() } else { ([0u16; 8], 0).into() };
    let socket = UdpSocket::bind(bind)?;
    socket.connect(target)?;
    socket.set_read_timeout(Some(timeout))?;
    let mut rtts = Vec::with_capacity(count as usize);
    let mut buf = [0u8; 16];
    for seq in 0..count {
        let start = Instant::now();
        let sent = socket.send(&seq.to_be_bytes());
        if sent.is_err() {
            continue;
        }
        // Stale echoes from timed-out probes carry an older sequence number.
        let deadline = start + timeout;
        loop {
            match socket.recv(&mut buf) {
                Ok(4) if buf[..4] == seq.to_be_bytes() => {
                    rtts.push(start.elapsed().as_secs_f64());
                    break;
                }
                Ok(_) if Instant::now() < deadline => {
                    socket.set_read_timeout(Some(deadline.saturating_duration_since(Instant::now()).max(Duration::from_micros(1))))?;
                }
                _ => break,
            }
        }
        socket.set_read_timeout(Some(timeout))?;
    }
    if rtts.is_empty() {
        return Err(ProbeError::Unreachable(target));
    }
    let n = rtts.len() as f64;
    let mean = rtts.iter().sum::<f64>() / n;
    let var = rtts.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok(ProbeReport {
        target: target.to_string(),
        sent: count,
        received: rtts.len() as u32,
        mean_secs: mean,
        std_secs: var.sqrt(),
    })
}

/// Echoes every datagram back to its sender until dropped.
pub struct EchoServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl EchoServer {
    pub fn start(bind: &str) -> io::Result<EchoServer> {
        let socket = UdpSocket::bind(bind)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let addr = socket.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let worker = thread::Builder::new().name("udp-echo".into()).spawn(move || {
            let mut buf = [0u8; 1500];
            while !flag.load(Ordering::SeqCst) {
                if let Ok((n, from)) = socket.recv_from(&mut buf) {
                    let _ = socket.send_to(&buf[..n], from);
                }
            }
        })?;
        Ok(EchoServer { addr, stop, worker: Some(worker) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }
}

impl Drop for EchoServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.worker.take() {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_echo() {
        let echo = EchoServer::start("127.0.0.1:0").unwrap();
        let r = probe(echo.local_addr(), 30, Duration::from_secs(1)).unwrap();
        assert_eq!((r.sent, r.received), (30, 30));
        assert!(r.mean_secs < 0.0106);
        assert!(r.std_secs >= 0.0);
    }

    #[test]
    fn zero_count_and_silence() {
        let echo = EchoServer::start("127.0.0.1:0").unwrap();
        assert!(matches!(probe(echo.local_addr(), 0, Duration::from_millis(10)), Err(ProbeError::ZeroCount)));
        let silent = UdpSocket::bind("127.0.0.1:0").unwrap();
        let err = probe(silent.local_addr().unwrap(), 2, Duration::from_millis(30)).unwrap_err();
        assert!(matches!(err, ProbeError::Unreachable(_)));
    }
}
