//! In-process publish/subscribe bus carrying raw sensor data.
//!
//! Each topic keeps its own sequence counter and subscriber list. Queues are
//! bounded; a publisher blocks while any subscriber queue on the topic is full.

use crate::context::{AvalancheLevel, TouristId};
use crate::geo::GeoPoint;
use crate::world::{AnimalId, BtsStationId, Group, Timestamp, WeatherStationId};
use crossbeam_channel::{bounded, Receiver, RecvError, Sender};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use thiserror::Error;

pub const DEFAULT_CAPACITY: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Topic {
    Weather,
    BtsMeasurement,
    GpsTourist,
    GpsAnimal,
    Control,
}

impl Topic {
    pub const ALL: [Topic; 5] = [
        Topic::Weather,
        Topic::BtsMeasurement,
        Topic::GpsTourist,
        Topic::GpsAnimal,
        Topic::Control,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// One raw weather station reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherReading {
    pub station: WeatherStationId,
    /// m/s
    pub wind: f64,
    /// m
    pub visibility: f64,
    /// °C
    pub temperature: f64,
    /// mm/h
    pub rain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtsSignal {
    pub station: BtsStationId,
    pub phone: TouristId,
    /// dBm
    pub rssi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouristFix {
    pub tourist: TouristId,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnimalFix {
    pub animal: AnimalId,
    pub point: GeoPoint,
    pub dangerous: bool,
}

/// Operator and registration traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Control {
    RegisterGroup(Group),
    /// The phone can report GPS but its owner declined tracking.
    GpsDeclined(TouristId),
    SetAvalanche {
        level: AvalancheLevel,
        operator: String,
    },
    SwapAlertSet(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Weather(WeatherReading),
    Bts(BtsSignal),
    GpsTourist(TouristFix),
    GpsAnimal(AnimalFix),
    Control(Control),
    /// Marks that everything up to the carried timestamp has been published.
    /// Valid on every topic.
    Watermark,
}

impl Payload {
    pub fn matches(&self, topic: Topic) -> bool {
        matches!(
            (self, topic),
            (Payload::Watermark, _)
                | (Payload::Weather(_), Topic::Weather)
                | (Payload::Bts(_), Topic::BtsMeasurement)
                | (Payload::GpsTourist(_), Topic::GpsTourist)
                | (Payload::GpsAnimal(_), Topic::GpsAnimal)
                | (Payload::Control(_), Topic::Control)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub topic: Topic,
    pub timestamp: Timestamp,
    pub sequence: u64,
    pub payload: Payload,
}

#[derive(Debug, Error, PartialEq)]
pub enum BrokerError {
    #[error("broker is closed")]
    Closed,
    #[error("payload does not belong on topic {0:?}")]
    SchemaMismatch(Topic),
    #[error("subscription capacity must be positive")]
    ZeroCapacity,
}

#[derive(Default)]
struct TopicState {
    next_sequence: u64,
    subscribers: Vec<Sender<Message>>,
}

struct Inner {
    closed: AtomicBool,
    topics: [Mutex<TopicState>; 5],
}

/// Cheaply clonable handle to a shared bus.
#[derive(Clone)]
pub struct Broker {
    inner: Arc<Inner>,
}

impl Default for Broker {
    fn default() -> Self {
        Self::new()
    }
}

impl Broker {
    pub fn new() -> Self {
        Self {
            inner: Arc::new(Inner {
                closed: AtomicBool::new(false),
                topics: Default::default(),
            }),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.inner.closed.load(Ordering::SeqCst)
    }

    /// Stamps the next sequence number and delivers to every subscriber.
    /// Returns the stamped sequence.
    pub fn publish(
        &self,
        topic: Topic,
        timestamp: Timestamp,
        payload: Payload,
    ) -> Result<u64, BrokerError> {
        if !payload.matches(topic) {
            return Err(BrokerError::SchemaMismatch(topic));
        }
        let mut state = self.inner.topics[topic.index()].lock().expect("topic lock");
        // Checked under the lock so close() cannot interleave with a delivery.
        if self.is_closed() {
            return Err(BrokerError::Closed);
        }
        let message = Message {
            topic,
            timestamp,
            sequence: state.next_sequence,
            payload,
        };
        state.next_sequence += 1;
        // Dropped subscriptions are pruned; live ones may block (backpressure).
        state
            .subscribers
            .retain(|tx| tx.send(message.clone()).is_ok());
        Ok(message.sequence)
    }

    pub fn subscribe(&self, topic: Topic, capacity: usize) -> Result<Subscription, BrokerError> {
        if capacity == 0 {
            return Err(BrokerError::ZeroCapacity);
        }
        let mut state = self.inner.topics[topic.index()].lock().expect("topic lock");
        if self.is_closed() {
            return Err(BrokerError::Closed);
        }
        let (tx, rx) = bounded(capacity);
        state.subscribers.push(tx);
        Ok(Subscription { topic, rx })
    }

    /// Rejects further publishes; subscribers drain what is queued and then end.
    pub fn close(&self) {
        for t in &self.inner.topics {
            let mut state = t.lock().expect("topic lock");
            self.inner.closed.store(true, Ordering::SeqCst);
            state.subscribers.clear();
        }
    }
}

/// FIFO stream of one topic's messages published after subscription.
pub struct Subscription {
    topic: Topic,
    rx: Receiver<Message>,
}

impl Subscription {
    pub fn topic(&self) -> Topic {
        self.topic
    }

    /// Blocks for the next message; `None` once the broker is closed and drained.
    pub fn recv(&self) -> Option<Message> {
        self.rx.recv().map_err(|RecvError| ()).ok()
    }

    pub fn try_recv(&self) -> Option<Message> {
        self.rx.try_recv().ok()
    }

    pub fn len(&self) -> usize {
        self.rx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rx.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Message> + '_ {
        self.rx.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn weather(station: u16) -> Payload {
        Payload::Weather(WeatherReading {
            station: WeatherStationId(station),
            wind: 1.0,
            visibility: 1.0,
            temperature: 1.0,
            rain: 1.0,
        })
    }

    #[test]
    fn fifo_and_fan_out() {
        let b = Broker::new();
        let s1 = b.subscribe(Topic::Weather, 8).unwrap();
        let s2 = b.subscribe(Topic::Weather, 8).unwrap();
        for i in 0..3 {
            b.publish(Topic::Weather, i, weather(i as u16)).unwrap();
        }
        for s in [&s1, &s2] {
            let got: Vec<_> = (0..3).map(|_| s.try_recv().unwrap().sequence).collect();
            assert_eq!(got, [0, 1, 2]);
            assert!(s.try_recv().is_none());
        }
    }

    #[test]
    fn no_replay_before_subscription() {
        let b = Broker::new();
        b.publish(Topic::Weather, 0, weather(1)).unwrap();
        let s = b.subscribe(Topic::Weather, 8).unwrap();
        b.publish(Topic::Weather, 1, weather(2)).unwrap();
        assert_eq!(s.try_recv().unwrap().sequence, 1);
        assert!(s.try_recv().is_none());
    }

    #[test]
    fn closed_broker_rejects() {
        let b = Broker::new();
        let s = b.subscribe(Topic::Weather, 8).unwrap();
        b.publish(Topic::Weather, 0, weather(1)).unwrap();
        b.close();
        assert_eq!(
            b.publish(Topic::Weather, 1, weather(1)),
            Err(BrokerError::Closed)
        );
        assert!(s.recv().is_some());
        assert!(s.recv().is_none());
    }

    #[test]
    fn schema_and_capacity_checked() {
        let b = Broker::new();
        assert_eq!(
            b.publish(Topic::Control, 0, weather(1)),
            Err(BrokerError::SchemaMismatch(Topic::Control))
        );
        assert!(b.publish(Topic::Control, 0, Payload::Watermark).is_ok());
        assert!(matches!(
            b.subscribe(Topic::Weather, 0),
            Err(BrokerError::ZeroCapacity)
        ));
    }

    #[test]
    fn full_queue_blocks_publisher() {
        let b = Broker::new();
        let s = b.subscribe(Topic::Weather, 1).unwrap();
        b.publish(Topic::Weather, 0, weather(0)).unwrap();
        let (done_tx, done_rx) = crossbeam_channel::bounded(1);
        let b2 = b.clone();
        let h = std::thread::spawn(move || {
            b2.publish(Topic::Weather, 1, weather(1)).unwrap();
            done_tx.send(()).unwrap();
        });
        assert!(done_rx.recv_timeout(Duration::from_millis(100)).is_err());
        assert_eq!(s.recv().unwrap().sequence, 0);
        done_rx.recv_timeout(Duration::from_secs(5)).unwrap();
        assert_eq!(s.recv().unwrap().sequence, 1);
        h.join().unwrap();
    }

    #[test]
    fn dropped_subscription_does_not_block() {
        let b = Broker::new();
        let s = b.subscribe(Topic::Weather, 1).unwrap();
        drop(s);
        for i in 0..10 {
            b.publish(Topic::Weather, i, weather(0)).unwrap();
        }
    }
}
