//! Live-capture front end: a paced ICMP echo traffic inducer and a polling
//! RSSI source, both testable against mocks.
//!
//! Sources implement [`RssiSource`]; the pseudo-file poller runs on its own
//! thread and hands samples to the consumer through a bounded queue
//! (drop-oldest on overflow, with a counter), so a slow consumer can never
//! stall capture.
//!
//! The inducer prefers an unprivileged ICMP datagram socket, falls back to a
//! raw ICMP socket, and finally to plain UDP probes (which still provoke
//! reply traffic on most networks) with a warning.

use std::io;
use std::net::{IpAddr, Ipv4Addr};
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crossbeam_queue::ArrayQueue;

use crate::ingest::{parse_proc_wireless, SessionLog};
use crate::signal::SyntheticSession;
use crate::types::{rssi_in_range, RssiSample};
use crate::{Error, Result};

/// A pull-based stream of RSSI samples with monotone timestamps.
pub trait RssiSource {
    /// Next sample, or `None` at end of stream.
    fn next_sample(&mut self) -> Option<RssiSample>;
}

/// Replays a recorded session's timestamps and values exactly.
pub struct ReplaySource {
    samples: std::vec::IntoIter<RssiSample>,
}

impl ReplaySource {
    pub fn from_samples(samples: Vec<RssiSample>) -> Self {
        Self { samples: samples.into_iter() }
    }

    pub fn from_session(session: &SessionLog) -> Self {
        Self::from_samples(session.samples.clone())
    }

    pub fn from_synthetic(session: &SyntheticSession) -> Self {
        Self::from_samples(session.samples.clone())
    }
}

impl RssiSource for ReplaySource {
    fn next_sample(&mut self) -> Option<RssiSample> {
        self.samples.next()
    }
}

/// Poller configuration for a wireless-extensions pseudo-file.
#[derive(Debug, Clone)]
pub struct PollerConfig {
    /// Pseudo-file to read, `/proc/net/wireless` on a real system.
    pub path: PathBuf,
    /// Read rate in Hz.
    pub rate_hz: f64,
    /// Interface to select; the first row when unset.
    pub interface: Option<String>,
    /// Bounded queue capacity between poller and consumer.
    pub capacity: usize,
}

impl Default for PollerConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("/proc/net/wireless"),
            rate_hz: 200.0,
            interface: None,
            capacity: 1024,
        }
    }
}

/// Background-thread poller over a wireless pseudo-file.
///
/// Every successful read yields one sample; duplicate kernel values are kept
/// on purpose (each read is a measurement). Parse failures are counted and
/// skipped; a vanishing file ends the stream with a diagnostic.
pub struct PolledSource {
    queue: Arc<ArrayQueue<RssiSample>>,
    stop: Arc<AtomicBool>,
    done: Arc<AtomicBool>,
    dropped: Arc<AtomicU64>,
    parse_failures: Arc<AtomicU64>,
    diagnostic: Arc<Mutex<Option<String>>>,
    handle: Option<JoinHandle<()>>,
    idle_wait: Duration,
}

impl PolledSource {
    pub fn start(cfg: PollerConfig) -> Result<Self> {
        if !(cfg.rate_hz > 0.0) {
            return Err(Error::InvalidParam(format!(
                "poll rate must be positive, got {}",
                cfg.rate_hz
            )));
        }
        if cfg.capacity == 0 {
            return Err(Error::InvalidParam("queue capacity must be positive".into()));
        }
        let queue = Arc::new(ArrayQueue::new(cfg.capacity));
        let stop = Arc::new(AtomicBool::new(false));
        let done = Arc::new(AtomicBool::new(false));
        let dropped = Arc::new(AtomicU64::new(0));
        let parse_failures = Arc::new(AtomicU64::new(0));
        let diagnostic = Arc::new(Mutex::new(None));
        let interval = Duration::from_secs_f64(1.0 / cfg.rate_hz);

        let thread_queue = Arc::clone(&queue);
        let thread_stop = Arc::clone(&stop);
        let thread_done = Arc::clone(&done);
        let thread_dropped = Arc::clone(&dropped);
        let thread_failures = Arc::clone(&parse_failures);
        let thread_diag = Arc::clone(&diagnostic);

        let handle = thread::spawn(move || {
            let epoch_ms = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as i64)
                .unwrap_or(0);
            let started = Instant::now();
            let mut next = started;
            let mut last_ts = i64::MIN;
            while !thread_stop.load(Ordering::Relaxed) {
                let now = Instant::now();
                if next > now {
                    thread::sleep(next - now);
                }
                next += interval;
                if next + interval < Instant::now() {
                    next = Instant::now();
                }
                let text = match std::fs::read_to_string(&cfg.path) {
                    Ok(text) => text,
                    Err(e) => {
                        *thread_diag.lock().unwrap() =
                            Some(format!("poll source `{}` ended: {e}", cfg.path.display()));
                        break;
                    }
                };
                let rows = match parse_proc_wireless(&text) {
                    Ok(rows) => rows,
                    Err(_) => {
                        thread_failures.fetch_add(1, Ordering::Relaxed);
                        continue;
                    }
                };
                let row = match &cfg.interface {
                    Some(name) => rows.into_iter().find(|r| &r.interface == name),
                    None => rows.into_iter().next(),
                };
                let Some(row) = row else {
                    thread_failures.fetch_add(1, Ordering::Relaxed);
                    continue;
                };
                if !rssi_in_range(row.level_dbm) {
                    thread_failures.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
                let mut ts = epoch_ms + started.elapsed().as_millis() as i64;
                if ts <= last_ts {
                    ts = last_ts + 1;
                }
                last_ts = ts;
                if thread_queue.force_push(RssiSample::new(ts, row.level_dbm)).is_some() {
                    thread_dropped.fetch_add(1, Ordering::Relaxed);
                }
            }
            thread_done.store(true, Ordering::Release);
        });

        Ok(Self {
            queue,
            stop,
            done,
            dropped,
            parse_failures,
            diagnostic,
            handle: Some(handle),
            idle_wait: interval / 4,
        })
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::Relaxed);
    }

    /// Samples displaced from the full queue.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn parse_failures(&self) -> u64 {
        self.parse_failures.load(Ordering::Relaxed)
    }

    /// Why the stream ended, when it ended abnormally.
    pub fn diagnostic(&self) -> Option<String> {
        self.diagnostic.lock().unwrap().clone()
    }
}

impl RssiSource for PolledSource {
    fn next_sample(&mut self) -> Option<RssiSample> {
        loop {
            if let Some(sample) = self.queue.pop() {
                return Some(sample);
            }
            if self.done.load(Ordering::Acquire) {
                return self.queue.pop();
            }
            thread::sleep(self.idle_wait.max(Duration::from_micros(200)));
        }
    }
}

impl Drop for PolledSource {
    fn drop(&mut self) {
        self.stop();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

/// Traffic inducer configuration.
#[derive(Debug, Clone)]
pub struct InducerConfig {
    pub target: IpAddr,
    /// Echo request rate (requests/s).
    pub rate_hz: f64,
    /// ICMP payload size in bytes.
    pub payload_size: usize,
    /// Stop after this long; `None` runs until the stop flag.
    pub duration: Option<Duration>,
}

impl Default for InducerConfig {
    fn default() -> Self {
        Self {
            target: IpAddr::V4(Ipv4Addr::LOCALHOST),
            rate_hz: 700.0,
            payload_size: 16,
            duration: None,
        }
    }
}

impl InducerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz > 0.0) {
            return Err(Error::InvalidParam(format!(
                "induce rate must be positive, got {}",
                self.rate_hz
            )));
        }
        if self.payload_size > 1400 {
            return Err(Error::InvalidParam("payload too large for one frame".into()));
        }
        Ok(())
    }
}

/// Inducer run statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct InduceStats {
    pub sent: u64,
    pub errors: u64,
    pub elapsed_s: f64,
    pub achieved_rate_hz: f64,
    /// Probe mechanism actually used.
    pub mechanism: &'static str,
    /// Set when the preferred ICMP mechanisms were unavailable.
    pub degraded: bool,
}

impl InduceStats {
    /// `key=value` lines, the termination output format.
    pub fn to_kv_lines(&self) -> String {
        format!(
            "sent={}\nerrors={}\nelapsed_s={:.3}\nachieved_rate_hz={:.2}\nmechanism={}\ndegraded={}\n",
            self.sent, self.errors, self.elapsed_s, self.achieved_rate_hz, self.mechanism,
            self.degraded
        )
    }
}

/// One probe transmission attempt.
pub trait Prober: Send {
    fn probe(&mut self) -> io::Result<()>;
    fn mechanism(&self) -> &'static str;
}

/// RFC 1071 ones'-complement checksum.
fn icmp_checksum(bytes: &[u8]) -> u16 {
    let mut sum = 0u32;
    for chunk in bytes.chunks(2) {
        let word = if chunk.len() == 2 {
            u16::from_be_bytes([chunk[0], chunk[1]])
        } else {
            u16::from_be_bytes([chunk[0], 0])
        };
        sum = sum.wrapping_add(word as u32);
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

fn build_echo_request(ident: u16, seq: u16, payload_size: usize) -> Vec<u8> {
    let mut packet = vec![0u8; 8 + payload_size];
    packet[0] = 8; // echo request
    packet[1] = 0;
    packet[4..6].copy_from_slice(&ident.to_be_bytes());
    packet[6..8].copy_from_slice(&seq.to_be_bytes());
    for (k, byte) in packet[8..].iter_mut().enumerate() {
        *byte = (k & 0xff) as u8;
    }
    let checksum = icmp_checksum(&packet);
    packet[2..4].copy_from_slice(&checksum.to_be_bytes());
    packet
}

fn ipv4_of(target: IpAddr) -> Result<Ipv4Addr> {
    match target {
        IpAddr::V4(v4) => Ok(v4),
        IpAddr::V6(_) => Err(Error::InvalidParam(
            "the inducer supports IPv4 targets only".into(),
        )),
    }
}

fn sockaddr_v4(addr: Ipv4Addr, port: u16) -> libc::sockaddr_in {
    libc::sockaddr_in {
        sin_family: libc::AF_INET as libc::sa_family_t,
        sin_port: port.to_be(),
        sin_addr: libc::in_addr { s_addr: u32::from_ne_bytes(addr.octets()) },
        sin_zero: [0; 8],
    }
}

fn open_socket(type_: libc::c_int, proto: libc::c_int) -> io::Result<OwnedFd> {
    let fd = unsafe { libc::socket(libc::AF_INET, type_, proto) };
    if fd < 0 {
        return Err(io::Error::last_os_error());
    }
    Ok(unsafe { OwnedFd::from_raw_fd(fd) })
}

struct SocketProber {
    fd: OwnedFd,
    addr: libc::sockaddr_in,
    packet: Vec<u8>,
    seq: u16,
    icmp: bool,
    mechanism: &'static str,
}

impl SocketProber {
    fn send(&mut self) -> io::Result<()> {
        if self.icmp {
            self.seq = self.seq.wrapping_add(1);
            self.packet[6..8].copy_from_slice(&self.seq.to_be_bytes());
            self.packet[2..4].copy_from_slice(&[0, 0]);
            let checksum = icmp_checksum(&self.packet);
            self.packet[2..4].copy_from_slice(&checksum.to_be_bytes());
        }
        let rc = unsafe {
            libc::sendto(
                self.fd.as_raw_fd(),
                self.packet.as_ptr() as *const libc::c_void,
                self.packet.len(),
                0,
                &self.addr as *const libc::sockaddr_in as *const libc::sockaddr,
                std::mem::size_of::<libc::sockaddr_in>() as libc::socklen_t,
            )
        };
        if rc < 0 {
            return Err(io::Error::last_os_error());
        }
        Ok(())
    }
}

impl Prober for SocketProber {
    fn probe(&mut self) -> io::Result<()> {
        self.send()
    }

    fn mechanism(&self) -> &'static str {
        self.mechanism
    }
}

/// Opens the best available probe socket: ICMP datagram, then raw ICMP, then
/// UDP. Returns the prober and whether it is the degraded UDP mode.
pub fn open_prober(target: IpAddr, payload_size: usize) -> Result<(Box<dyn Prober>, bool)> {
    let v4 = ipv4_of(target)?;
    let ident = (std::process::id() & 0xffff) as u16;
    let packet = build_echo_request(ident, 0, payload_size);

    if let Ok(fd) = open_socket(libc::SOCK_DGRAM, libc::IPPROTO_ICMP) {
        return Ok((
            Box::new(SocketProber {
                fd,
                addr: sockaddr_v4(v4, 0),
                packet,
                seq: 0,
                icmp: true,
                mechanism: "icmp-dgram",
            }),
            false,
        ));
    }
    if let Ok(fd) = open_socket(libc::SOCK_RAW, libc::IPPROTO_ICMP) {
        return Ok((
            Box::new(SocketProber {
                fd,
                addr: sockaddr_v4(v4, 0),
                packet,
                seq: 0,
                icmp: true,
                mechanism: "icmp-raw",
            }),
            false,
        ));
    }
    match open_socket(libc::SOCK_DGRAM, libc::IPPROTO_UDP) {
        Ok(fd) => Ok((
            Box::new(SocketProber {
                fd,
                // Traceroute-style high port: almost certainly closed, still
                // provokes reply traffic (port unreachable) on most hosts.
                addr: sockaddr_v4(v4, 33434),
                packet: vec![0u8; payload_size.max(1)],
                seq: 0,
                icmp: false,
                mechanism: "udp",
            }),
            true,
        )),
        Err(e) => Err(Error::Io(io::Error::new(
            e.kind(),
            format!(
                "no probe socket available (ICMP datagram, ICMP raw and UDP all failed): {e}. \
                 Grant CAP_NET_RAW or widen net.ipv4.ping_group_range."
            ),
        ))),
    }
}

/// Paced probe loop against an explicit prober; the testable core of
/// [`induce`]. Uses an absolute schedule (`start + k*interval`), sleeps
/// between probes and honors the stop flag within one interval.
pub fn induce_with(
    prober: &mut dyn Prober,
    cfg: &InducerConfig,
    stop: &AtomicBool,
) -> Result<InduceStats> {
    cfg.validate()?;
    let interval = Duration::from_secs_f64(1.0 / cfg.rate_hz);
    let start = Instant::now();
    let mut next = start;
    let mut sent = 0u64;
    let mut errors = 0u64;
    loop {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        if let Some(limit) = cfg.duration {
            if start.elapsed() >= limit {
                break;
            }
        }
        let now = Instant::now();
        if next > now {
            thread::sleep(next - now);
            if stop.load(Ordering::Relaxed) {
                break;
            }
        }
        match prober.probe() {
            Ok(()) => sent += 1,
            Err(_) => errors += 1,
        }
        next += interval;
        if next + interval < Instant::now() {
            // Fell behind; resynchronize instead of bursting.
            next = Instant::now();
        }
    }
    let elapsed_s = start.elapsed().as_secs_f64();
    Ok(InduceStats {
        sent,
        errors,
        elapsed_s,
        achieved_rate_hz: if elapsed_s > 0.0 {
            (sent + errors) as f64 / elapsed_s
        } else {
            0.0
        },
        mechanism: prober.mechanism(),
        degraded: false,
    })
}

/// Runs the traffic inducer until the stop flag (or the configured duration).
pub fn induce(cfg: &InducerConfig, stop: &AtomicBool) -> Result<InduceStats> {
    let (mut prober, degraded) = open_prober(cfg.target, cfg.payload_size)?;
    if degraded {
        eprintln!(
            "warning: ICMP sockets unavailable, probing {} with UDP instead",
            cfg.target
        );
    }
    let mut stats = induce_with(prober.as_mut(), cfg, stop)?;
    stats.degraded = degraded;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct NullProber(u64);

    impl Prober for NullProber {
        fn probe(&mut self) -> io::Result<()> {
            self.0 += 1;
            Ok(())
        }

        fn mechanism(&self) -> &'static str {
            "null"
        }
    }

    #[test]
    fn replay_reproduces_samples_exactly() {
        let samples = vec![
            RssiSample::new(0, -40.0),
            RssiSample::new(5, -41.5),
            RssiSample::new(12, -39.0),
        ];
        let mut source = ReplaySource::from_samples(samples.clone());
        let mut out = Vec::new();
        while let Some(s) = source.next_sample() {
            out.push(s);
        }
        assert_eq!(out, samples);
    }

    #[test]
    fn checksum_matches_reference() {
        // RFC 1071 example words 0x0001, 0xf203, 0xf4f5, 0xf6f7.
        let data = [0x00, 0x01, 0xf2, 0x03, 0xf4, 0xf5, 0xf6, 0xf7];
        assert_eq!(icmp_checksum(&data), !0xddf2u16);
    }

    #[test]
    fn echo_request_has_valid_checksum() {
        let packet = build_echo_request(0x1234, 7, 16);
        assert_eq!(packet.len(), 24);
        assert_eq!(packet[0], 8);
        assert_eq!(icmp_checksum(&packet), 0);
    }

    #[test]
    fn pacing_hits_target_rate() {
        let cfg = InducerConfig {
            rate_hz: 100.0,
            duration: Some(Duration::from_secs(2)),
            ..InducerConfig::default()
        };
        let stop = AtomicBool::new(false);
        let mut prober = NullProber(0);
        let stats = induce_with(&mut prober, &cfg, &stop).unwrap();
        assert!(
            (180..=220).contains(&(stats.sent as i64)),
            "sent {} in {:.3}s",
            stats.sent,
            stats.elapsed_s
        );
        assert!((stats.achieved_rate_hz - 100.0).abs() < 10.0);
    }

    #[test]
    fn zero_rate_is_a_config_error() {
        let cfg = InducerConfig { rate_hz: 0.0, ..InducerConfig::default() };
        let stop = AtomicBool::new(false);
        assert!(induce_with(&mut NullProber(0), &cfg, &stop).is_err());
    }

    #[test]
    fn stop_flag_halts_within_one_interval() {
        let cfg = InducerConfig {
            rate_hz: 10.0,
            duration: None,
            ..InducerConfig::default()
        };
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let handle = thread::spawn(move || {
            let mut prober = NullProber(0);
            induce_with(&mut prober, &cfg, &flag).unwrap()
        });
        thread::sleep(Duration::from_millis(250));
        stop.store(true, Ordering::Relaxed);
        let started = Instant::now();
        let stats = handle.join().unwrap();
        assert!(started.elapsed() < Duration::from_millis(150), "stop took too long");
        assert!(stats.sent >= 2);
    }

    #[test]
    fn stats_kv_format() {
        let stats = InduceStats {
            sent: 10,
            errors: 1,
            elapsed_s: 2.0,
            achieved_rate_hz: 5.5,
            mechanism: "null",
            degraded: false,
        };
        let text = stats.to_kv_lines();
        assert!(text.contains("sent=10\n"));
        assert!(text.contains("achieved_rate_hz=5.50\n"));
    }

    #[test]
    fn poller_streams_from_mock_pseudo_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wireless");
        let write_snapshot = |level: i32| {
            let body = format!(
                "Inter-| sta-|   Quality        |   Discarded packets               | Missed | WE\n face | tus | link level noise |  nwid  crypt   frag  retry   misc | beacon | 22\n wlan0: 0000   54.  {level}.  -256        0      0      0      0      0        0\n"
            );
            let tmp = dir.path().join("wireless.tmp");
            std::fs::write(&tmp, body).unwrap();
            std::fs::rename(&tmp, &path).unwrap();
        };
        write_snapshot(-61);

        let writer_stop = Arc::new(AtomicBool::new(false));
        let writer_flag = Arc::clone(&writer_stop);
        let writer_dir = path.clone();
        let writer = thread::spawn(move || {
            let mut level = -61;
            while !writer_flag.load(Ordering::Relaxed) {
                level = if level <= -80 { -61 } else { level - 1 };
                let body = format!(
                    "Inter-| sta-|   Quality        |   Discarded packets               | Missed | WE\n face | tus | link level noise |  nwid  crypt   frag  retry   misc | beacon | 22\n wlan0: 0000   54.  {level}.  -256        0      0      0      0      0        0\n"
                );
                let tmp = writer_dir.with_extension("tmp");
                std::fs::write(&tmp, body).unwrap();
                std::fs::rename(&tmp, &writer_dir).unwrap();
                thread::sleep(Duration::from_millis(5));
            }
        });

        let mut source = PolledSource::start(PollerConfig {
            path: path.clone(),
            rate_hz: 200.0,
            interface: Some("wlan0".into()),
            capacity: 1024,
        })
        .unwrap();

        let deadline = Instant::now() + Duration::from_secs(1);
        let mut samples = Vec::new();
        while Instant::now() < deadline {
            if let Some(s) = source.next_sample() {
                samples.push(s);
            } else {
                break;
            }
        }
        source.stop();
        writer_stop.store(true, Ordering::Relaxed);
        writer.join().unwrap();

        assert!(
            samples.len() >= 150,
            "sustained only {} samples/s from a 200 Hz mock",
            samples.len()
        );
        assert!(samples.windows(2).all(|w| w[1].timestamp_ms > w[0].timestamp_ms));
        assert!(samples.iter().all(|s| (-90.0..=-50.0).contains(&s.rssi_dbm)));
    }

    #[test]
    fn poller_ends_with_diagnostic_when_file_vanishes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wireless");
        std::fs::write(
            &path,
            "Inter-| sta-|   Quality        |   Discarded packets               | Missed | WE\n face | tus | link level noise |  nwid  crypt   frag  retry   misc | beacon | 22\n wlan0: 0000   54.  -61.  -256        0      0      0      0      0        0\n",
        )
        .unwrap();
        let mut source = PolledSource::start(PollerConfig {
            path: path.clone(),
            rate_hz: 100.0,
            interface: None,
            capacity: 64,
        })
        .unwrap();
        assert!(source.next_sample().is_some());
        std::fs::remove_file(&path).unwrap();
        // Drain until the stream ends.
        let deadline = Instant::now() + Duration::from_secs(2);
        while source.next_sample().is_some() {
            assert!(Instant::now() < deadline, "stream did not end");
        }
        assert!(source.diagnostic().is_some());
    }

    #[test]
    fn static_file_yields_constant_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wireless");
        std::fs::write(
            &path,
            " wlan0: 0000   54.  -61.  -256        0      0      0      0      0        0\n",
        )
        .unwrap();
        let mut source = PolledSource::start(PollerConfig {
            path,
            rate_hz: 400.0,
            interface: None,
            capacity: 64,
        })
        .unwrap();
        let values: Vec<f64> = (0..20)
            .filter_map(|_| source.next_sample().map(|s| s.rssi_dbm))
            .collect();
        source.stop();
        assert_eq!(values.len(), 20);
        assert!(values.iter().all(|&v| v == -61.0));
    }
}
