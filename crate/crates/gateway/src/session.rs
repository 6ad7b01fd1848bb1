//! Live broker sessions and the connectors that open them.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

use edge_gateway_core::adapter::{Attempt, Connector, Protocol};

use crate::coap::{CoapClient, CoapClientError};
use crate::mqtt::{MqttClient, MqttError};

const REQUEST_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Mqtt(#[from] MqttError),
    #[error(transparent)]
    Coap(#[from] CoapClientError),
}

/// An inbound publish or notification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Received {
    pub resource_id: String,
    pub payload: Vec<u8>,
}

#[derive(Debug)]
pub enum Session {
    Mqtt(MqttClient),
    /// Initial representations returned by observe registrations wait in
    /// the queue until polled.
    Coap(CoapClient, VecDeque<Received>),
}

impl Session {
    pub fn protocol(&self) -> Protocol {
        match self {
            Session::Mqtt(_) => Protocol::Mqtt,
            Session::Coap(..) => Protocol::Coap,
        }
    }

    /// Subscribes to everything the broker offers. For CoAP this observes
    /// every discovered resource not yet observed, so call it again to pick
    /// up new ones.
    pub fn subscribe_all(&mut self) -> Result<(), SessionError> {
        match self {
            Session::Mqtt(c) => Ok(c.subscribe("#", REQUEST_TIMEOUT)?),
            Session::Coap(c, pending) => {
                for path in c.discover(REQUEST_TIMEOUT)? {
                    if !c.is_observing(&path) {
                        let payload = c.observe(&path, REQUEST_TIMEOUT)?;
                        pending.push_back(Received { resource_id: coap_uri(c.server(), &path), payload });
                    }
                }
                Ok(())
            }
        }
    }

    pub fn poll(&mut self, timeout: Duration) -> Result<Option<Received>, SessionError> {
        match self {
            Session::Mqtt(c) => {
                Ok(c.poll(timeout)?.map(|m| Received { resource_id: m.topic, payload: m.payload }))
            }
            Session::Coap(c, pending) => {
                if let Some(r) = pending.pop_front() {
                    return Ok(Some(r));
                }
                let server = c.server();
                Ok(c.poll(timeout)?.map(|n| Received { resource_id: coap_uri(server, &n.path), payload: n.payload }))
            }
        }
    }

    /// Liveness check used between polls.
    pub fn keepalive(&mut self) -> Result<(), SessionError> {
        match self {
            Session::Mqtt(c) => Ok(c.ping(REQUEST_TIMEOUT)?),
            Session::Coap(c, _) => Ok(c.ping(REQUEST_TIMEOUT)?),
        }
    }
}

pub fn coap_uri(server: SocketAddr, path: &str) -> String {
    format!("coap://{server}/{}", path.trim_start_matches('/'))
}

pub struct MqttConnector {
    pub client_id: String,
}

impl Connector<Session> for MqttConnector {
    fn protocol(&self) -> Protocol {
        Protocol::Mqtt
    }

    fn attempt(&mut self, endpoint: SocketAddr, timeout: Duration) -> Attempt<Session> {
        let start = Instant::now();
        match MqttClient::connect(endpoint, &self.client_id, timeout) {
            Ok(c) => Attempt::Connected { session: Session::Mqtt(c), elapsed: start.elapsed() },
            Err(_) => Attempt::Failed { elapsed: start.elapsed() },
        }
    }
}

pub struct CoapConnector;

impl Connector<Session> for CoapConnector {
    fn protocol(&self) -> Protocol {
        Protocol::Coap
    }

    fn attempt(&mut self, endpoint: SocketAddr, timeout: Duration) -> Attempt<Session> {
        let start = Instant::now();
        let Ok(mut c) = CoapClient::new(endpoint) else {
            return Attempt::Failed { elapsed: start.elapsed() };
        };
        match c.ping(timeout) {
            Ok(()) => Attempt::Connected { session: Session::Coap(c, VecDeque::new()), elapsed: start.elapsed() },
            Err(_) => Attempt::Failed { elapsed: start.elapsed() },
        }
    }
}
