use std::collections::VecDeque;
use std::io::{self, Read};
use std::net::{Shutdown, SocketAddr, TcpStream};
use std::time::Duration;

use super::codec::{read_packet, write_packet, CodecError, Packet};

#[derive(Debug, thiserror::Error)]
pub enum MqttError {
    #[error("timed out")]
    Timeout,
    #[error("connection closed by peer")]
    Closed,
    #[error("connection refused with code {0}")]
    Refused(u8),
    #[error("unexpected packet {0:?}")]
    Unexpected(Box<Packet>),
    #[error(transparent)]
    Codec(CodecError),
}

impl From<CodecError> for MqttError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::Io(io) => io.into(),
            other => MqttError::Codec(other),
        }
    }
}

impl From<io::Error> for MqttError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => MqttError::Timeout,
            io::ErrorKind::UnexpectedEof | io::ErrorKind::ConnectionReset | io::ErrorKind::BrokenPipe => {
                MqttError::Closed
            }
            _ => MqttError::Codec(CodecError::Io(e)),
        }
    }
}

/// A received application message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub topic: String,
    pub payload: Vec<u8>,
}

/// Blocking MQTT 3.1.1 client over one TCP connection.
#[derive(Debug)]
pub struct MqttClient {
    stream: TcpStream,
    inbox: VecDeque<Message>,
    next_id: u16,
    /// Bound on completing a packet once its first byte has arrived.
    frame_timeout: Duration,
}

impl MqttClient {
    /// Opens TCP and completes CONNECT/CONNACK within `timeout`.
    pub fn connect(addr: SocketAddr, client_id: &str, timeout: Duration) -> Result<Self, MqttError> {
        let stream = TcpStream::connect_timeout(&addr, timeout)?;
        stream.set_nodelay(true)?;
        let mut client = MqttClient { stream, inbox: VecDeque::new(), next_id: 1, frame_timeout: Duration::from_secs(5) };
        write_packet(&mut client.stream, &Packet::Connect { client_id: client_id.into(), keep_alive: 60, clean_session: true })?;
        match client.read(timeout)? {
            Some(Packet::Connack { code: 0, .. }) => Ok(client),
            Some(Packet::Connack { code, .. }) => Err(MqttError::Refused(code)),
            Some(other) => Err(MqttError::Unexpected(Box::new(other))),
            None => Err(MqttError::Timeout),
        }
    }

    pub fn peer_addr(&self) -> io::Result<SocketAddr> {
        self.stream.peer_addr()
    }

    fn packet_id(&mut self) -> u16 {
        let id = self.next_id;
        self.next_id = self.next_id.checked_add(1).unwrap_or(1);
        id
    }

    /// Next packet, or `None` if nothing starts arriving within `timeout`.
    fn read(&mut self, timeout: Duration) -> Result<Option<Packet>, MqttError> {
        self.stream.set_read_timeout(Some(timeout.max(Duration::from_millis(1))))?;
        let mut first = [0u8; 1];
        match self.stream.read(&mut first) {
            Ok(0) => return Err(MqttError::Closed),
            Ok(_) => {}
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        self.stream.set_read_timeout(Some(self.frame_timeout))?;
        let packet = read_packet(&mut (&first[..]).chain(&mut self.stream))?;
        Ok(Some(packet))
    }

    /// Reads until `want` matches, queueing publishes that arrive meanwhile.
    fn await_packet(&mut self, timeout: Duration, want: impl Fn(&Packet) -> bool) -> Result<Packet, MqttError> {
        let deadline = std::time::Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(std::time::Instant::now());
            if left.is_zero() {
                return Err(MqttError::Timeout);
            }
            match self.read(left)? {
                Some(p) if want(&p) => return Ok(p),
                Some(p) => self.absorb(p)?,
                None => return Err(MqttError::Timeout),
            }
        }
    }

    fn absorb(&mut self, packet: Packet) -> Result<(), MqttError> {
        match packet {
            Packet::Publish { topic, payload, qos, packet_id, .. } => {
                if qos == 1 {
                    write_packet(&mut self.stream, &Packet::Puback { packet_id: packet_id.unwrap_or(0) })?;
                }
                self.inbox.push_back(Message { topic, payload });
                Ok(())
            }
            Packet::Pingresp | Packet::Puback { .. } => Ok(()),
            other => Err(MqttError::Unexpected(Box::new(other))),
        }
    }

    pub fn subscribe(&mut self, filter: &str, timeout: Duration) -> Result<(), MqttError> {
        let id = self.packet_id();
        write_packet(&mut self.stream, &Packet::Subscribe { packet_id: id, filters: vec![(filter.into(), 0)] })?;
        match self.await_packet(timeout, |p| matches!(p, Packet::Suback { packet_id, .. } if *packet_id == id))? {
            Packet::Suback { codes, .. } if codes.iter().all(|c| *c < 0x80) => Ok(()),
            Packet::Suback { codes, .. } => Err(MqttError::Refused(codes.first().copied().unwrap_or(0x80))),
            other => Err(MqttError::Unexpected(Box::new(other))),
        }
    }

    /// QoS 0 is fire-and-forget; QoS 1 waits for the PUBACK.
    pub fn publish(&mut self, topic: &str, payload: &[u8], qos: u8, timeout: Duration) -> Result<(), MqttError> {
        let packet_id = (qos > 0).then(|| self.packet_id());
        write_packet(
            &mut self.stream,
            &Packet::Publish { topic: topic.into(), payload: payload.to_vec(), qos: qos.min(1), packet_id, dup: false, retain: false },
        )?;
        if let Some(id) = packet_id {
            self.await_packet(timeout, |p| matches!(p, Packet::Puback { packet_id } if *packet_id == id))?;
        }
        Ok(())
    }

    pub fn ping(&mut self, timeout: Duration) -> Result<(), MqttError> {
        write_packet(&mut self.stream, &Packet::Pingreq)?;
        self.await_packet(timeout, |p| matches!(p, Packet::Pingresp))?;
        Ok(())
    }

    /// Next application message, or `None` after `timeout` of silence.
    pub fn poll(&mut self, timeout: Duration) -> Result<Option<Message>, MqttError> {
        if let Some(m) = self.inbox.pop_front() {
            return Ok(Some(m));
        }
        match self.read(timeout)? {
            Some(p) => {
                self.absorb(p)?;
                Ok(self.inbox.pop_front())
            }
            None => Ok(None),
        }
    }

    pub fn disconnect(mut self) {
        let _ = write_packet(&mut self.stream, &Packet::Disconnect);
        let _ = self.stream.shutdown(Shutdown::Both);
    }
}
