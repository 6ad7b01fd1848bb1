use std::collections::{BTreeMap, VecDeque};
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::time::{Duration, Instant};

use super::codec::{code, encode_uint, parse_links, CoapError, Message, MessageType, OPT_OBSERVE};

#[derive(Debug, thiserror::Error)]
pub enum CoapClientError {
    #[error("timed out")]
    Timeout,
    #[error("server answered {0:#04x}")]
    Status(u8),
    #[error(transparent)]
    Codec(#[from] CoapError),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for CoapClientError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => CoapClientError::Timeout,
            _ => CoapClientError::Io(e),
        }
    }
}

/// A resource representation received from the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Notification {
    pub path: String,
    pub payload: Vec<u8>,
}

/// Blocking CoAP client bound to one server.
#[derive(Debug)]
pub struct CoapClient {
    socket: UdpSocket,
    server: SocketAddr,
    next_mid: u16,
    next_token: u32,
    observing: BTreeMap<Vec<u8>, String>,
    inbox: VecDeque<Notification>,
}

impl CoapClient {
    pub fn new(server: SocketAddr) -> io::Result<CoapClient> {
        let bind: SocketAddr = if server.is_ipv4() { ([0, 0, 0, 0], 0).into() } else { ([0u16; 8], 0).into() };
        let socket = UdpSocket::bind(bind)?;
        socket.connect(server)?;
        Ok(CoapClient {
            socket,
            server,
            next_mid: 1,
            next_token: 1,
            observing: BTreeMap::new(),
            inbox: VecDeque::new(),
        })
    }

    pub fn server(&self) -> SocketAddr {
        self.server
    }

    fn mid(&mut self) -> u16 {
        let m = self.next_mid;
        self.next_mid = self.next_mid.wrapping_add(1);
        m
    }

    fn token(&mut self) -> Vec<u8> {
        let t = self.next_token;
        self.next_token = self.next_token.wrapping_add(1);
        t.to_be_bytes().to_vec()
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<Message>, CoapClientError> {
        self.socket.set_read_timeout(Some(timeout.max(Duration::from_millis(1))))?;
        let mut buf = [0u8; 2048];
        match self.socket.recv(&mut buf) {
            Ok(n) => Ok(Message::decode(&buf[..n]).ok()),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Queues a notification for an observed token; acknowledges CONs.
    fn absorb(&mut self, m: Message) -> Result<(), CoapClientError> {
        if m.mtype == MessageType::Confirmable {
            self.socket.send(&Message::new(MessageType::Acknowledgement, code::EMPTY, m.message_id).encode())?;
        }
        if m.code == code::CONTENT {
            if let Some(path) = self.observing.get(&m.token) {
                self.inbox.push_back(Notification { path: path.clone(), payload: m.payload });
            }
        }
        Ok(())
    }

    fn exchange(&mut self, req: Message, timeout: Duration, want: impl Fn(&Message) -> bool) -> Result<Message, CoapClientError> {
        self.socket.send(&req.encode())?;
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(CoapClientError::Timeout);
            }
            match self.recv(left)? {
                Some(m) if want(&m) => return Ok(m),
                Some(m) => self.absorb(m)?,
                None => return Err(CoapClientError::Timeout),
            }
        }
    }

    /// Empty CON answered by RST: the liveness handshake.
    pub fn ping(&mut self, timeout: Duration) -> Result<(), CoapClientError> {
        let mid = self.mid();
        self.exchange(Message::ping(mid), timeout, |m| m.mtype == MessageType::Reset && m.message_id == mid)?;
        Ok(())
    }

    fn request(&mut self, mut req: Message, timeout: Duration) -> Result<Message, CoapClientError> {
        req.message_id = self.mid();
        let mid = req.message_id;
        let token = req.token.clone();
        let resp = self.exchange(req, timeout, |m| {
            m.token == token && (m.message_id == mid || m.mtype != MessageType::Acknowledgement) && m.code != code::EMPTY
        })?;
        if resp.code != code::CONTENT {
            return Err(CoapClientError::Status(resp.code));
        }
        Ok(resp)
    }

    pub fn get(&mut self, path: &str, timeout: Duration) -> Result<Vec<u8>, CoapClientError> {
        let token = self.token();
        Ok(self.request(Message::get(0, &token, path), timeout)?.payload)
    }

    /// Registers as an observer and returns the current representation.
    pub fn observe(&mut self, path: &str, timeout: Duration) -> Result<Vec<u8>, CoapClientError> {
        let token = self.token();
        let mut req = Message::get(0, &token, path);
        req.add_option(OPT_OBSERVE, encode_uint(0));
        let resp = self.request(req, timeout)?;
        self.observing.insert(token, path.trim_start_matches('/').to_string());
        Ok(resp.payload)
    }

    pub fn is_observing(&self, path: &str) -> bool {
        let path = path.trim_start_matches('/');
        self.observing.values().any(|p| p == path)
    }

    /// Resource paths listed by `/.well-known/core`.
    pub fn discover(&mut self, timeout: Duration) -> Result<Vec<String>, CoapClientError> {
        let body = self.get(".well-known/core", timeout)?;
        Ok(parse_links(&String::from_utf8_lossy(&body)))
    }

    /// Next notification, or `None` after `timeout` of silence.
    pub fn poll(&mut self, timeout: Duration) -> Result<Option<Notification>, CoapClientError> {
        if let Some(n) = self.inbox.pop_front() {
            return Ok(Some(n));
        }
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.recv(left)? {
                Some(m) => {
                    self.absorb(m)?;
                    if let Some(n) = self.inbox.pop_front() {
                        return Ok(Some(n));
                    }
                }
                None => return Ok(None),
            }
            if left.is_zero() {
                return Ok(None);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coap::{CoapServer, ServerFaults};

    const T: Duration = Duration::from_secs(2);

    #[test]
    fn ping_get_discover_observe() {
        let server = CoapServer::start("127.0.0.1:0", ServerFaults::default()).unwrap();
        server.publish("kista/temp/7", b"21.5");
        server.publish("solna/hum/2", b"40");
        let mut c = CoapClient::new(server.local_addr()).unwrap();
        c.ping(T).unwrap();
        assert_eq!(c.discover(T).unwrap(), vec!["kista/temp/7", "solna/hum/2"]);
        assert_eq!(c.get("kista/temp/7", T).unwrap(), b"21.5");
        assert!(matches!(c.get("nope", T), Err(CoapClientError::Status(0x84))));
        assert_eq!(c.observe("/kista/temp/7", T).unwrap(), b"21.5");
        assert_eq!(server.observer_count(), 1);
        server.publish("kista/temp/7", b"22.0");
        server.publish("solna/hum/2", b"41");
        let n = c.poll(T).unwrap().unwrap();
        assert_eq!(n, Notification { path: "kista/temp/7".into(), payload: b"22.0".to_vec() });
        assert!(c.poll(Duration::from_millis(50)).unwrap().is_none());
    }

    #[test]
    fn dropped_ping_times_out() {
        let faults = ServerFaults { drop_ping_rate: 0.999_999, ..ServerFaults::default() };
        let server = CoapServer::start("127.0.0.1:0", faults).unwrap();
        let mut c = CoapClient::new(server.local_addr()).unwrap();
        assert!(matches!(c.ping(Duration::from_millis(100)), Err(CoapClientError::Timeout)));
        assert_eq!(server.counters().dropped_pings, 1);
    }
}
