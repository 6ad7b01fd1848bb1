//! In-process MQTT broker for tests and the simulation harness.
//!
//! Supports CONNECT, SUBSCRIBE (QoS 0 grants), PUBLISH at QoS 0/1 with
//! fan-out to matching filters, PING and DISCONNECT. Faults are injected
//! from a seeded generator: a dropped CONNECT never gets its CONNACK, and
//! every CONNACK can be delayed.

use std::io::Write;
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::codec::{encode, read_packet, topic_matches, Packet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrokerFaults {
    /// Probability that a CONNECT is silently ignored.
    pub drop_connect_rate: f64,
    /// Delay before every CONNACK.
    pub connack_delay: Duration,
    pub seed: u64,
}

impl Default for BrokerFaults {
    fn default() -> Self {
        BrokerFaults { drop_connect_rate: 0.0, connack_delay: Duration::ZERO, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BrokerCounters {
    pub connects: u64,
    pub dropped_connects: u64,
    pub published: u64,
    pub delivered: u64,
}

struct Subscription {
    conn: u64,
    filter: String,
    writer: Arc<Mutex<TcpStream>>,
}

struct Shared {
    subs: Mutex<Vec<Subscription>>,
    conns: Mutex<Vec<(u64, TcpStream)>>,
    rng: Mutex<ChaCha8Rng>,
    faults: BrokerFaults,
    stop: AtomicBool,
    next_conn: AtomicU64,
    counters: Mutex<BrokerCounters>,
}

impl Shared {
    fn fan_out(&self, topic: &str, payload: &[u8]) {
        let frame = encode(&Packet::Publish {
            topic: topic.into(),
            payload: payload.to_vec(),
            qos: 0,
            packet_id: None,
            dup: false,
            retain: false,
        });
        let mut delivered = 0;
        let subs = self.subs.lock().expect("subscription lock");
        let mut seen = Vec::new();
        for s in subs.iter().filter(|s| topic_matches(&s.filter, topic)) {
            if seen.contains(&s.conn) {
                continue;
            }
            seen.push(s.conn);
            if s.writer.lock().expect("writer lock").write_all(&frame).is_ok() {
                delivered += 1;
            }
        }
        drop(subs);
        let mut c = self.counters.lock().expect("counter lock");
        c.published += 1;
        c.delivered += delivered;
    }
}

/// Handle to a running broker; dropping it stops the broker.
pub struct Broker {
    addr: SocketAddr,
    shared: Arc<Shared>,
    accept: Option<JoinHandle<()>>,
}

impl Broker {
    pub fn start(bind: &str, faults: BrokerFaults) -> std::io::Result<Broker> {
        let listener = TcpListener::bind(bind)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            subs: Mutex::new(Vec::new()),
            conns: Mutex::new(Vec::new()),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(faults.seed)),
            faults,
            stop: AtomicBool::new(false),
            next_conn: AtomicU64::new(1),
            counters: Mutex::new(BrokerCounters::default()),
        });
        let s = Arc::clone(&shared);
        let accept = thread::Builder::new().name("mqtt-broker".into()).spawn(move || {
            for stream in listener.incoming() {
                if s.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let s = Arc::clone(&s);
                let _ = thread::Builder::new().name("mqtt-conn".into()).spawn(move || serve(s, stream));
            }
        })?;
        Ok(Broker { addr, shared, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Publishes as if from a device client.
    pub fn publish(&self, topic: &str, payload: &[u8]) {
        self.shared.fan_out(topic, payload);
    }

    pub fn counters(&self) -> BrokerCounters {
        *self.shared.counters.lock().expect("counter lock")
    }

    pub fn subscriber_count(&self) -> usize {
        self.shared.subs.lock().expect("subscription lock").len()
    }

    /// Drops every client connection, as if the broker restarted.
    pub fn kick_all(&self) {
        let conns = std::mem::take(&mut *self.shared.conns.lock().expect("conn lock"));
        for (_, c) in conns {
            let _ = c.shutdown(Shutdown::Both);
        }
        self.shared.subs.lock().expect("subscription lock").clear();
    }

    pub fn stop(&mut self) {
        if self.shared.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        self.kick_all();
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Broker {
    fn drop(&mut self) {
        self.stop();
    }
}

fn serve(shared: Arc<Shared>, stream: TcpStream) {
    let conn = shared.next_conn.fetch_add(1, Ordering::SeqCst);
    let _ = stream.set_nodelay(true);
    let Ok(mut reader) = stream.try_clone() else { return };
    let Ok(registered) = stream.try_clone() else { return };
    shared.conns.lock().expect("conn lock").push((conn, registered));
    let writer = Arc::new(Mutex::new(stream));
    let send = |p: &Packet| writer.lock().expect("writer lock").write_all(&encode(p)).is_ok();

    let mut silent = false;
    loop {
        if shared.stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(packet) = read_packet(&mut reader) else { break };
        if silent {
            continue;
        }
        let ok = match packet {
            Packet::Connect { .. } => {
                let dropped = {
                    let mut rng = shared.rng.lock().expect("rng lock");
                    rng.random::<f64>() < shared.faults.drop_connect_rate
                };
                let mut c = shared.counters.lock().expect("counter lock");
                c.connects += 1;
                if dropped {
                    c.dropped_connects += 1;
                    silent = true;
                    true
                } else {
                    drop(c);
                    if !shared.faults.connack_delay.is_zero() {
                        thread::sleep(shared.faults.connack_delay);
                    }
                    send(&Packet::Connack { session_present: false, code: 0 })
                }
            }
            Packet::Publish { topic, payload, qos, packet_id, .. } => {
                shared.fan_out(&topic, &payload);
                qos == 0 || send(&Packet::Puback { packet_id: packet_id.unwrap_or(0) })
            }
            Packet::Subscribe { packet_id, filters } => {
                let codes = vec![0; filters.len()];
                {
                    let mut subs = shared.subs.lock().expect("subscription lock");
                    for (filter, _) in filters {
                        subs.push(Subscription { conn, filter, writer: Arc::clone(&writer) });
                    }
                }
                send(&Packet::Suback { packet_id, codes })
            }
            Packet::Unsubscribe { packet_id, filters } => {
                shared.subs.lock().expect("subscription lock").retain(|s| s.conn != conn || !filters.contains(&s.filter));
                send(&Packet::Unsuback { packet_id })
            }
            Packet::Pingreq => send(&Packet::Pingresp),
            Packet::Disconnect => break,
            _ => true,
        };
        if !ok {
            break;
        }
    }
    shared.subs.lock().expect("subscription lock").retain(|s| s.conn != conn);
    shared.conns.lock().expect("conn lock").retain(|(c, _)| *c != conn);
    let _ = reader.shutdown(Shutdown::Both);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mqtt::{MqttClient, MqttError};

    const T: Duration = Duration::from_secs(2);

    #[test]
    fn publish_reaches_subscribers() {
        let broker = Broker::start("127.0.0.1:0", BrokerFaults::default()).unwrap();
        let mut sub = MqttClient::connect(broker.local_addr(), "sub", T).unwrap();
        sub.subscribe("kista/#", T).unwrap();
        let mut publisher = MqttClient::connect(broker.local_addr(), "pub", T).unwrap();
        publisher.publish("kista/temp/7", b"21.5", 1, T).unwrap();
        publisher.publish("solna/temp/1", b"3", 1, T).unwrap();
        broker.publish("kista/hum/1", b"40");
        let a = sub.poll(T).unwrap().unwrap();
        assert_eq!((a.topic.as_str(), a.payload.as_slice()), ("kista/temp/7", &b"21.5"[..]));
        assert_eq!(sub.poll(T).unwrap().unwrap().topic, "kista/hum/1");
        assert!(sub.poll(Duration::from_millis(50)).unwrap().is_none());
        sub.ping(T).unwrap();
    }

    #[test]
    fn dropped_connect_times_out() {
        let faults = BrokerFaults { drop_connect_rate: 0.999_999, ..BrokerFaults::default() };
        let broker = Broker::start("127.0.0.1:0", faults).unwrap();
        let err = MqttClient::connect(broker.local_addr(), "x", Duration::from_millis(100)).unwrap_err();
        assert!(matches!(err, MqttError::Timeout));
        assert_eq!(broker.counters().dropped_connects, 1);
    }

    #[test]
    fn kicked_clients_see_close() {
        let broker = Broker::start("127.0.0.1:0", BrokerFaults::default()).unwrap();
        let mut c = MqttClient::connect(broker.local_addr(), "x", T).unwrap();
        broker.kick_all();
        assert!(matches!(c.poll(T), Err(MqttError::Closed)));
    }
}
