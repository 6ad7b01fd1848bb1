//! In-process CoAP server: resources, `/.well-known/core`, Observe, and
//! seeded fault injection on the ping handshake.

use std::collections::BTreeMap;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU16, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::codec::{code, encode_uint, Message, MessageType, LINK_FORMAT, OPT_CONTENT_FORMAT, OPT_OBSERVE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerFaults {
    /// Probability that a ping goes unanswered.
    pub drop_ping_rate: f64,
    /// Delay before every reply.
    pub reply_delay: Duration,
    pub seed: u64,
}

impl Default for ServerFaults {
    fn default() -> Self {
        ServerFaults { drop_ping_rate: 0.0, reply_delay: Duration::ZERO, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerCounters {
    pub pings: u64,
    pub dropped_pings: u64,
    pub requests: u64,
    pub notifications: u64,
}

#[derive(Debug, Clone)]
struct Observer {
    addr: SocketAddr,
    token: Vec<u8>,
    path: String,
}

struct Shared {
    socket: UdpSocket,
    resources: Mutex<BTreeMap<String, Vec<u8>>>,
    observers: Mutex<Vec<Observer>>,
    rng: Mutex<ChaCha8Rng>,
    faults: ServerFaults,
    counters: Mutex<ServerCounters>,
    next_mid: AtomicU16,
    observe_seq: Mutex<u32>,
    stop: AtomicBool,
}

impl Shared {
    fn send(&self, msg: &Message, to: SocketAddr) {
        let _ = self.socket.send_to(&msg.encode(), to);
    }

    fn notify(&self, path: &str, payload: &[u8]) {
        let observers: Vec<Observer> =
            self.observers.lock().expect("observer lock").iter().filter(|o| o.path == path).cloned().collect();
        let seq = {
            let mut s = self.observe_seq.lock().expect("seq lock");
            *s = (*s + 1) & 0x00FF_FFFF;
            *s
        };
        for o in observers {
            let mut m = Message::new(MessageType::NonConfirmable, code::CONTENT, self.next_mid.fetch_add(1, Ordering::SeqCst));
            m.token = o.token.clone();
            m.add_option(OPT_OBSERVE, encode_uint(seq));
            m.payload = payload.to_vec();
            self.send(&m, o.addr);
            self.counters.lock().expect("counter lock").notifications += 1;
        }
    }

    fn handle(&self, req: Message, from: SocketAddr) {
        if req.code == code::EMPTY {
            if req.mtype != MessageType::Confirmable {
                return;
            }
            let dropped = self.rng.lock().expect("rng lock").random::<f64>() < self.faults.drop_ping_rate;
            {
                let mut c = self.counters.lock().expect("counter lock");
                c.pings += 1;
                c.dropped_pings += u64::from(dropped);
            }
            if !dropped {
                self.delay();
                self.send(&Message::new(MessageType::Reset, code::EMPTY, req.message_id), from);
            }
            return;
        }
        if matches!(req.mtype, MessageType::Acknowledgement | MessageType::Reset) {
            return;
        }
        self.counters.lock().expect("counter lock").requests += 1;
        let reply_type = if req.mtype == MessageType::Confirmable {
            MessageType::Acknowledgement
        } else {
            MessageType::NonConfirmable
        };
        let mid = if reply_type == MessageType::Acknowledgement {
            req.message_id
        } else {
            self.next_mid.fetch_add(1, Ordering::SeqCst)
        };
        let mut resp = Message::new(reply_type, code::CONTENT, mid);
        resp.token = req.token.clone();
        let path = req.path();
        if req.code != code::GET {
            resp.code = code::METHOD_NOT_ALLOWED;
        } else if path == ".well-known/core" {
            let links: Vec<String> =
                self.resources.lock().expect("resource lock").keys().map(|p| format!("</{p}>")).collect();
            resp.add_option(OPT_CONTENT_FORMAT, encode_uint(LINK_FORMAT as u32));
            resp.payload = links.join(",").into_bytes();
        } else {
            let current = self.resources.lock().expect("resource lock").get(&path).cloned();
            match current {
                None => resp.code = code::NOT_FOUND,
                Some(payload) => {
                    let mut observers = self.observers.lock().expect("observer lock");
                    observers.retain(|o| !(o.addr == from && o.token == req.token));
                    if req.observe() == Some(0) {
                        observers.push(Observer { addr: from, token: req.token.clone(), path });
                        resp.add_option(OPT_OBSERVE, encode_uint(*self.observe_seq.lock().expect("seq lock")));
                    }
                    resp.payload = payload;
                }
            }
        }
        self.delay();
        self.send(&resp, from);
    }

    fn delay(&self) {
        if !self.faults.reply_delay.is_zero() {
            thread::sleep(self.faults.reply_delay);
        }
    }
}

/// Handle to a running server; dropping it stops the server.
pub struct CoapServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    worker: Option<JoinHandle<()>>,
}

impl CoapServer {
    pub fn start(bind: &str, faults: ServerFaults) -> std::io::Result<CoapServer> {
        let socket = UdpSocket::bind(bind)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        let addr = socket.local_addr()?;
        let shared = Arc::new(Shared {
            socket,
            resources: Mutex::new(BTreeMap::new()),
            observers: Mutex::new(Vec::new()),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(faults.seed)),
            faults,
            counters: Mutex::new(ServerCounters::default()),
            next_mid: AtomicU16::new(0x4000),
            observe_seq: Mutex::new(0),
            stop: AtomicBool::new(false),
        });
        let s = Arc::clone(&shared);
        let worker = thread::Builder::new().name("coap-server".into()).spawn(move || {
            let mut buf = [0u8; 2048];
            while !s.stop.load(Ordering::SeqCst) {
                let Ok((n, from)) = s.socket.recv_from(&mut buf) else { continue };
                if let Ok(msg) = Message::decode(&buf[..n]) {
                    s.handle(msg, from);
                }
            }
        })?;
        Ok(CoapServer { addr, shared, worker: Some(worker) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Creates or updates a resource and notifies its observers.
    pub fn publish(&self, path: &str, payload: &[u8]) {
        let path = path.trim_start_matches('/').to_string();
        self.shared.resources.lock().expect("resource lock").insert(path.clone(), payload.to_vec());
        self.shared.notify(&path, payload);
    }

    pub fn observer_count(&self) -> usize {
        self.shared.observers.lock().expect("observer lock").len()
    }

    pub fn counters(&self) -> ServerCounters {
        *self.shared.counters.lock().expect("counter lock")
    }

    pub fn stop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.worker.take() {
            let _ = h.join();
        }
    }
}

impl Drop for CoapServer {
    fn drop(&mut self) {
        self.stop();
    }
}
