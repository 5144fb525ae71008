//! Publish/subscribe bus abstraction with two interchangeable transports.
//!
//! [`InProcessBroker`] keeps per-topic append-only logs behind a mutex;
//! subscribing replays a topic from the start and then follows it live.
//! [`TcpBrokerServer`] bridges the same log over TCP using newline-delimited
//! frames (`<topic-length> <topic> <payload-length>\n<payload>`), and
//! [`TcpBroker`] is the matching client. Delivery is at-least-once with
//! per-topic FIFO within one broker instance.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use thiserror::Error;

/// First frame of a connection may carry this topic to turn the connection
/// into a subscription; its payload names the subscribed topic.
pub const SUBSCRIBE_TOPIC: &str = "broker.subscribe";

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("broker is stopped")]
    Stopped,
    #[error("invalid topic \"{0}\": must be non-empty without whitespace")]
    InvalidTopic(String),
    #[error("malformed frame: {0}")]
    BadFrame(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A message channel name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topic(String);

impl Topic {
    pub fn new(name: &str) -> Result<Topic, BrokerError> {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(BrokerError::InvalidTopic(name.to_string()));
        }
        Ok(Topic(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for Topic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub enum StreamEvent {
    Message(Vec<u8>),
    Timeout,
    Closed,
}

trait MessageSource: Send {
    fn next_timeout(&mut self, timeout: Duration) -> StreamEvent;
}

/// A per-topic message stream, replayed from the first message.
pub struct Subscription {
    source: Box<dyn MessageSource>,
}

impl Subscription {
    pub fn next_timeout(&mut self, timeout: Duration) -> StreamEvent {
        self.source.next_timeout(timeout)
    }

    /// Blocks until a message arrives or the stream ends.
    pub fn next_blocking(&mut self) -> Option<Vec<u8>> {
        loop {
            match self.next_timeout(Duration::from_millis(200)) {
                StreamEvent::Message(m) => return Some(m),
                StreamEvent::Timeout => continue,
                StreamEvent::Closed => return None,
            }
        }
    }
}

pub trait Broker: Send + Sync {
    fn publish(&self, topic: &Topic, payload: &[u8]) -> Result<(), BrokerError>;
    fn subscribe(&self, topic: &Topic) -> Result<Subscription, BrokerError>;
}

#[derive(Default)]
struct BrokerState {
    topics: HashMap<String, Vec<Arc<[u8]>>>,
    stopped: bool,
}

/// In-process append-only log broker. Cloning shares the underlying logs.
#[derive(Clone, Default)]
pub struct InProcessBroker {
    state: Arc<(Mutex<BrokerState>, Condvar)>,
}

impl InProcessBroker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ends all streams; later publishes fail.
    pub fn stop(&self) {
        let (lock, cond) = &*self.state;
        lock.lock().unwrap().stopped = true;
        cond.notify_all();
    }
}

impl Broker for InProcessBroker {
    fn publish(&self, topic: &Topic, payload: &[u8]) -> Result<(), BrokerError> {
        let (lock, cond) = &*self.state;
        let mut state = lock.lock().unwrap();
        if state.stopped {
            return Err(BrokerError::Stopped);
        }
        state
            .topics
            .entry(topic.as_str().to_string())
            .or_default()
            .push(Arc::from(payload));
        cond.notify_all();
        Ok(())
    }

    fn subscribe(&self, topic: &Topic) -> Result<Subscription, BrokerError> {
        Ok(Subscription {
            source: Box::new(InProcessStream {
                state: Arc::clone(&self.state),
                topic: topic.as_str().to_string(),
                offset: 0,
            }),
        })
    }
}

struct InProcessStream {
    state: Arc<(Mutex<BrokerState>, Condvar)>,
    topic: String,
    offset: usize,
}

impl MessageSource for InProcessStream {
    fn next_timeout(&mut self, timeout: Duration) -> StreamEvent {
        let (lock, cond) = &*self.state;
        let mut state = lock.lock().unwrap();
        loop {
            if let Some(log) = state.topics.get(&self.topic) {
                if self.offset < log.len() {
                    let message = log[self.offset].to_vec();
                    self.offset += 1;
                    return StreamEvent::Message(message);
                }
            }
            if state.stopped {
                return StreamEvent::Closed;
            }
            let (next, result) = cond.wait_timeout(state, timeout).unwrap();
            state = next;
            if result.timed_out() {
                // Re-check once: a publish may have raced the timeout.
                if state
                    .topics
                    .get(&self.topic)
                    .is_some_and(|log| self.offset < log.len())
                {
                    continue;
                }
                return if state.stopped {
                    StreamEvent::Closed
                } else {
                    StreamEvent::Timeout
                };
            }
        }
    }
}

/// Writes one frame: `<topic-length> <topic> <payload-length>\n<payload>`.
pub fn write_frame(w: &mut impl Write, topic: &str, payload: &[u8]) -> Result<(), BrokerError> {
    writeln!(w, "{} {} {}", topic.len(), topic, payload.len())?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame; `Ok(None)` on clean end of stream.
pub fn read_frame(r: &mut impl BufRead) -> Result<Option<(String, Vec<u8>)>, BrokerError> {
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header)?;
    if header.is_empty() {
        return Ok(None);
    }
    let header = String::from_utf8(header)
        .map_err(|_| BrokerError::BadFrame("header is not UTF-8".into()))?;
    let mut parts = header.trim_end_matches('\n').splitn(3, ' ');
    let (Some(topic_len), Some(topic), Some(payload_len)) =
        (parts.next(), parts.next(), parts.next())
    else {
        return Err(BrokerError::BadFrame(format!(
            "expected \"<topic-length> <topic> <payload-length>\", got {header:?}"
        )));
    };
    let topic_len: usize = topic_len
        .parse()
        .map_err(|_| BrokerError::BadFrame(format!("bad topic length {topic_len:?}")))?;
    if topic.len() != topic_len {
        return Err(BrokerError::BadFrame(format!(
            "topic length {} does not match header {}",
            topic.len(),
            topic_len
        )));
    }
    let payload_len: usize = payload_len
        .trim()
        .parse()
        .map_err(|_| BrokerError::BadFrame(format!("bad payload length {payload_len:?}")))?;
    let mut payload = vec![0u8; payload_len];
    r.read_exact(&mut payload)?;
    Ok(Some((topic.to_string(), payload)))
}

/// TCP front end for an [`InProcessBroker`] log.
pub struct TcpBrokerServer {
    broker: InProcessBroker,
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
}

impl TcpBrokerServer {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<TcpBrokerServer, BrokerError> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let broker = InProcessBroker::new();
        let stop = Arc::new(AtomicBool::new(false));
        {
            let broker = broker.clone();
            let stop = Arc::clone(&stop);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let broker = broker.clone();
                    std::thread::spawn(move || {
                        let _ = handle_connection(stream, broker);
                    });
                }
            });
        }
        Ok(TcpBrokerServer { broker, addr, stop })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// The in-process side of the same log, for code co-located with the
    /// server.
    pub fn broker(&self) -> InProcessBroker {
        self.broker.clone()
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
        self.broker.stop();
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
    }
}

impl Drop for TcpBrokerServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn handle_connection(stream: TcpStream, broker: InProcessBroker) -> Result<(), BrokerError> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let Some((topic, payload)) = read_frame(&mut reader)? else {
        return Ok(());
    };
    if topic == SUBSCRIBE_TOPIC {
        let name = String::from_utf8(payload)
            .map_err(|_| BrokerError::BadFrame("subscribe payload is not UTF-8".into()))?;
        let topic = Topic::new(name.trim())?;
        let mut stream = stream;
        let mut subscription = broker.subscribe(&topic)?;
        loop {
            match subscription.next_timeout(Duration::from_millis(100)) {
                StreamEvent::Message(m) => {
                    if write_frame(&mut stream, topic.as_str(), &m).is_err() {
                        return Ok(());
                    }
                }
                StreamEvent::Timeout => continue,
                StreamEvent::Closed => return Ok(()),
            }
        }
    }
    broker.publish(&Topic::new(&topic)?, &payload)?;
    while let Some((topic, payload)) = read_frame(&mut reader)? {
        broker.publish(&Topic::new(&topic)?, &payload)?;
    }
    Ok(())
}

/// TCP client implementing [`Broker`] against a [`TcpBrokerServer`]. One
/// connection carries all publishes, so per-topic FIFO holds.
pub struct TcpBroker {
    addr: String,
    publisher: Mutex<Option<TcpStream>>,
}

impl TcpBroker {
    pub fn connect(addr: impl Into<String>) -> TcpBroker {
        TcpBroker {
            addr: addr.into(),
            publisher: Mutex::new(None),
        }
    }
}

impl Broker for TcpBroker {
    fn publish(&self, topic: &Topic, payload: &[u8]) -> Result<(), BrokerError> {
        if topic.as_str() == SUBSCRIBE_TOPIC {
            return Err(BrokerError::BadFrame(format!(
                "{SUBSCRIBE_TOPIC} is reserved for the transport"
            )));
        }
        let mut guard = self.publisher.lock().unwrap();
        if guard.is_none() {
            *guard = Some(TcpStream::connect(&self.addr)?);
        }
        let stream = guard.as_mut().expect("connected above");
        match write_frame(stream, topic.as_str(), payload) {
            Ok(()) => Ok(()),
            Err(e) => {
                // Drop the broken connection so the next publish reconnects.
                *guard = None;
                Err(e)
            }
        }
    }

    fn subscribe(&self, topic: &Topic) -> Result<Subscription, BrokerError> {
        let mut stream = TcpStream::connect(&self.addr)?;
        write_frame(&mut stream, SUBSCRIBE_TOPIC, topic.as_str().as_bytes())?;
        Ok(Subscription {
            source: Box::new(TcpStreamSource {
                reader: BufReader::new(stream),
            }),
        })
    }
}

struct TcpStreamSource {
    reader: BufReader<TcpStream>,
}

impl MessageSource for TcpStreamSource {
    fn next_timeout(&mut self, timeout: Duration) -> StreamEvent {
        if self
            .reader
            .get_ref()
            .set_read_timeout(Some(timeout))
            .is_err()
        {
            return StreamEvent::Closed;
        }
        match read_frame(&mut self.reader) {
            Ok(Some((_, payload))) => StreamEvent::Message(payload),
            Ok(None) => StreamEvent::Closed,
            Err(BrokerError::Io(e))
                if e.kind() == std::io::ErrorKind::WouldBlock
                    || e.kind() == std::io::ErrorKind::TimedOut =>
            {
                StreamEvent::Timeout
            }
            Err(_) => StreamEvent::Closed,
        }
    }
}
