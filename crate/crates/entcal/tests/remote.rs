//! The wire-protocol client against in-process mock servers.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::process::Command;
use std::thread;

use entcal::remote::{format_wire_f64, Endpoint, RemoteProvider};
use entcal::serve_check::{check_endpoint, CheckOptions};
use entcal_core::{entropy_nats, greedy_decode, DecodeRequest, Error, ModelProvider};
use serde_json::{json, Value};

#[derive(Clone, Copy, Default)]
enum Fault {
    #[default]
    None,
    /// Replies with V-1 values.
    Short,
    /// Adds a counter to every vector, so repeats differ.
    Drift,
    /// Answers logprobs requests with an error message.
    ErrorReply,
    /// Echoes the wrong request id.
    WrongId,
}

#[derive(Clone, Default)]
struct Mock {
    proto: u64,
    vocab: usize,
    fault: Fault,
    /// Sent verbatim for every context when set.
    fixed: Option<Vec<f64>>,
}

impl Mock {
    fn new(vocab: usize) -> Mock {
        Mock {
            proto: 1,
            vocab,
            ..Mock::default()
        }
    }

    /// Context-dependent log-softmax, used when no fixed vector is set.
    fn logprobs(&self, context: &[u64], calls: u64) -> Vec<f64> {
        if let Some(v) = &self.fixed {
            return v.clone();
        }
        let shift: u64 = context.iter().sum::<u64>()
            + if matches!(self.fault, Fault::Drift) {
                calls
            } else {
                0
            };
        let scores: Vec<f64> = (0..self.vocab as u64)
            .map(|i| ((i * 7 + shift) % 13) as f64 * 0.25)
            .collect();
        log_softmax(&scores)
    }

    fn reply(&self, req: &Value, calls: u64) -> String {
        let raw_id = req["id"].as_u64().unwrap_or(0);
        let id = if matches!(self.fault, Fault::WrongId) {
            raw_id + 1
        } else {
            raw_id
        };
        match req["type"].as_str() {
            Some("next_logprobs") => {
                if matches!(self.fault, Fault::ErrorReply) {
                    return json!({"id": id, "type": "error", "message": "model exploded"})
                        .to_string();
                }
                let ctx: Vec<u64> = req["context"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|x| x.as_u64().unwrap())
                    .collect();
                let mut values = self.logprobs(&ctx, calls);
                if matches!(self.fault, Fault::Short) {
                    values.pop();
                }
                let body: Vec<String> = values.iter().map(|&x| format_wire_f64(x)).collect();
                format!(
                    "{{\"id\":{id},\"type\":\"logprobs\",\"values\":[{}]}}",
                    body.join(",")
                )
            }
            Some("encode") => {
                let n = req["text"].as_str().unwrap().split_whitespace().count() as u64;
                let ids: Vec<u64> = (0..n).map(|i| 4 + i % (self.vocab as u64 - 4)).collect();
                json!({"id": id, "type": "ids", "values": ids}).to_string()
            }
            Some("decode") => {
                let ids = req["ids"].as_array().unwrap();
                let words: Vec<String> = ids.iter().map(|x| format!("w{}", x)).collect();
                json!({"id": id, "type": "text", "value": words.join(" ")}).to_string()
            }
            _ => json!({"id": id, "type": "error", "message": "unknown request"}).to_string(),
        }
    }

    fn serve(&self, stream: TcpStream) {
        let mut out = stream.try_clone().unwrap();
        let mut calls = 0;
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { return };
            let req: Value = serde_json::from_str(&line).unwrap();
            let reply = if req["type"] == "hello" {
                json!({"type": "hello", "proto": self.proto, "vocab_size": self.vocab,
                       "bos": 1, "eos": 2, "unk": 0, "model": "mock"})
                .to_string()
            } else {
                calls += 1;
                self.reply(&req, calls)
            };
            if writeln!(out, "{reply}").is_err() {
                return;
            }
        }
    }

    /// Listens on a free local port and serves every connection.
    fn spawn(self) -> Endpoint {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { return };
                let mock = self.clone();
                thread::spawn(move || mock.serve(stream));
            }
        });
        Endpoint::parse(&format!("tcp://{addr}")).unwrap()
    }
}

fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
    scores.iter().map(|s| s - m - z.ln()).collect()
}

fn protocol_error(e: Error) -> String {
    match e {
        Error::Protocol(m) => m,
        other => panic!("expected a protocol error, got {other:?}"),
    }
}

#[test]
fn fixed_vector_arrives_bit_exact() {
    let fixed = log_softmax(&[
        0.1,
        1.0 / 3.0,
        -2.5,
        7.0,
        std::f64::consts::PI,
        1e-300,
        0.0,
        2.0f64.sqrt(),
    ]);
    let ep = Mock {
        fixed: Some(fixed.clone()),
        ..Mock::new(8)
    }
    .spawn();
    let remote = RemoteProvider::connect(&ep).unwrap();
    let got = remote.raw_logprobs(&[1, 3]).unwrap();
    assert_eq!(got.len(), fixed.len());
    for (a, b) in got.iter().zip(&fixed) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn normalized_replies_are_used_verbatim() {
    let fixed = log_softmax(&[0.5, -1.0, 2.0, 0.0, 3.25]);
    let ep = Mock {
        fixed: Some(fixed.clone()),
        ..Mock::new(5)
    }
    .spawn();
    let remote = RemoteProvider::connect(&ep).unwrap();
    let d = remote.next_distribution(&[1]).unwrap();
    assert_eq!(d.logprobs(), &fixed[..]);
    let probs: Vec<f64> = fixed.iter().map(|x| x.exp()).collect();
    assert!((d.entropy() - entropy_nats(&probs).unwrap()).abs() < 1e-12);
}

#[test]
fn gpt2_sized_vocabulary() {
    let ep = Mock::new(50257).spawn();
    let remote = RemoteProvider::connect(&ep).unwrap();
    assert_eq!(remote.vocab_info().size, 50257);
    assert_eq!(remote.server_info().model.as_deref(), Some("mock"));
    let d = remote.next_distribution(&[1, 17, 400]).unwrap();
    assert_eq!(d.len(), 50257);
    assert!((d.mass() - 1.0).abs() < 1e-9);
}

#[test]
fn short_vector_is_a_protocol_error() {
    let ep = Mock {
        fault: Fault::Short,
        ..Mock::new(50)
    }
    .spawn();
    let remote = RemoteProvider::connect(&ep).unwrap();
    let msg = protocol_error(remote.raw_logprobs(&[1]).unwrap_err());
    assert!(msg.contains("expected 50"), "{msg}");
}

#[test]
fn version_mismatch_is_rejected_at_handshake() {
    let ep = Mock {
        proto: 2,
        ..Mock::new(10)
    }
    .spawn();
    let msg = protocol_error(RemoteProvider::connect(&ep).err().unwrap());
    assert!(msg.contains("protocol 2"), "{msg}");
}

#[test]
fn server_errors_and_stray_ids() {
    let ep = Mock {
        fault: Fault::ErrorReply,
        ..Mock::new(10)
    }
    .spawn();
    let remote = RemoteProvider::connect(&ep).unwrap();
    let msg = protocol_error(remote.raw_logprobs(&[1]).unwrap_err());
    assert!(msg.contains("model exploded"), "{msg}");

    let ep = Mock {
        fault: Fault::WrongId,
        ..Mock::new(10)
    }
    .spawn();
    let remote = RemoteProvider::connect(&ep).unwrap();
    let msg = protocol_error(remote.raw_logprobs(&[1]).unwrap_err());
    assert!(msg.contains("id"), "{msg}");
}

#[test]
fn ids_outside_the_vocabulary_never_reach_the_server() {
    let ep = Mock::new(10).spawn();
    let remote = RemoteProvider::connect(&ep).unwrap();
    assert!(matches!(
        remote.next_distribution(&[1, 10]),
        Err(Error::InvalidId { id: 10, .. })
    ));
}

#[test]
fn remote_greedy_matches_local_recomputation() {
    let mock = Mock::new(30);
    let ep = mock.clone().spawn();
    let remote = RemoteProvider::connect(&ep).unwrap();
    let prefix = vec![1, 5, 9];
    let rec = greedy_decode(&remote, &DecodeRequest::new(prefix.clone(), 12, 0)).unwrap();

    // replay the same argmax walk on the mock's own formula
    let mut ctx: Vec<u64> = prefix.iter().map(|&x| x as u64).collect();
    for (t, &tok) in rec.tokens.ids.iter().enumerate() {
        let lp = mock.logprobs(&ctx, 0);
        let probs: Vec<f64> = lp.iter().map(|x| x.exp()).collect();
        let best = (0..lp.len()).fold(0, |b, i| if lp[i] > lp[b] { i } else { b });
        assert_eq!(tok as usize, best, "step {t}");
        assert!((rec.entropies[t] - entropy_nats(&probs).unwrap()).abs() < 1e-12);
        assert!((rec.surprisals[t] + lp[best]).abs() < 1e-12);
        ctx.push(tok as u64);
    }
    assert_eq!(remote.decode(&[4, 5]).unwrap(), "w4 w5");
    assert_eq!(remote.encode("a b c").unwrap().ids, vec![4, 5, 6]);
}

#[test]
fn serve_check_passes_against_a_well_behaved_server() {
    let ep = Mock::new(64).spawn();
    let report = check_endpoint(
        &ep,
        &CheckOptions {
            probes: 25,
            ..CheckOptions::default()
        },
    )
    .unwrap();
    assert!(report.passed(), "{:?}", report.failures);
    assert_eq!(report.normalized, 25);
    assert!(report.deterministic);
    assert!(report.max_mass_error < 1e-9);
    assert!(report.lines().last().unwrap().ends_with("pass"));
}

#[test]
fn serve_check_reports_length_and_determinism_failures() {
    let ep = Mock {
        fault: Fault::Short,
        ..Mock::new(64)
    }
    .spawn();
    let report = check_endpoint(
        &ep,
        &CheckOptions {
            probes: 5,
            ..CheckOptions::default()
        },
    )
    .unwrap();
    assert!(!report.passed());
    assert!(report.failures.iter().any(|f| f.contains("expected 64")));

    let ep = Mock {
        fault: Fault::Drift,
        ..Mock::new(64)
    }
    .spawn();
    let report = check_endpoint(
        &ep,
        &CheckOptions {
            probes: 5,
            ..CheckOptions::default()
        },
    )
    .unwrap();
    assert!(!report.deterministic);
    assert!(!report.passed());
}

#[test]
fn serve_check_command_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_entcal");
    let good = Mock::new(40).spawn();
    let out = Command::new(bin)
        .args([
            "serve-check",
            "--endpoint",
            &good.to_string(),
            "--probes",
            "10",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("status=pass"));

    let bad = Mock {
        fault: Fault::Short,
        ..Mock::new(40)
    }
    .spawn();
    let out = Command::new(bin)
        .args([
            "serve-check",
            "--endpoint",
            &bad.to_string(),
            "--probes",
            "3",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "conformance");

    let old = Mock {
        proto: 7,
        ..Mock::new(40)
    }
    .spawn();
    let out = Command::new(bin)
        .args(["serve-check", "--endpoint", &old.to_string()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "protocol");
}
