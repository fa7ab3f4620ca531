//! Shared helpers for integration tests: fixture loading, a tiny scripted
//! HTTP server, and small hand-built households.
#![allow(dead_code)]

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;

use chainsynth::domain::{EmploymentStatus, StudentStatus};
use chainsynth::roster::read_roster;
use chainsynth::stats::ReferenceStats;
use chainsynth::{Household, Relationship, SocioProfile};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn test_fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn stats() -> ReferenceStats {
    ReferenceStats::load(File::open(fixtures().join("stats.json")).unwrap()).unwrap()
}

pub fn roster() -> Vec<Household> {
    read_roster(File::open(fixtures().join("roster.csv")).unwrap()).unwrap()
}

pub fn diary_roster() -> Vec<Household> {
    read_roster(File::open(fixtures().join("diary_roster.csv")).unwrap()).unwrap()
}

pub fn person(id: &str, rel: Relationship, age: u32, worker: bool, student: bool) -> SocioProfile {
    SocioProfile {
        agent_id: id.into(),
        gender: if age % 2 == 0 { "female" } else { "male" }.into(),
        age,
        education: "bachelor".into(),
        student_status: if student {
            StudentStatus::Student
        } else {
            StudentStatus::NonStudent
        },
        employment_status: if worker {
            EmploymentStatus::Employed
        } else {
            EmploymentStatus::NotInLaborForce
        },
        household_relationship: rel,
        income_level: "mid income".into(),
        has_driver_license: age >= 18,
        location_descriptor: "Orange County".into(),
    }
}

/// Head, spouse and child, ids `{hid}-1..3`.
pub fn family(hid: &str) -> Household {
    Household::new(
        hid.into(),
        vec![
            person(&format!("{hid}-1"), Relationship::Head, 44, true, false),
            person(&format!("{hid}-2"), Relationship::Spouse, 41, true, false),
            person(&format!("{hid}-3"), Relationship::Child, 12, false, true),
        ],
    )
    .unwrap()
}

/// A chat-completions response body carrying `content`.
pub fn envelope(content: &str) -> String {
    serde_json::json!({
        "id": "cmpl-1",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 100, "completion_tokens": 40, "total_tokens": 140}
    })
    .to_string()
}

/// Serves scripted `(status, body)` responses in order, one per connection;
/// the last one repeats. Request bodies are recorded.
pub struct StubServer {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<String>>>,
}

impl StubServer {
    pub fn start(script: Vec<(u16, String)>) -> Self {
        assert!(!script.is_empty());
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = requests.clone();
        thread::spawn(move || {
            for (n, stream) in listener.incoming().enumerate() {
                let Ok(mut stream) = stream else { continue };
                let body = read_request(&mut stream);
                seen.lock().unwrap().push(body);
                let (status, reply) = &script[n.min(script.len() - 1)];
                let response = format!(
                    "HTTP/1.1 {status} Stub\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
                let _ = stream.write_all(response.as_bytes());
                let _ = stream.flush();
            }
        });
        StubServer { base_url, requests }
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> String {
    let mut reader = BufReader::new(stream);
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            break;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    let _ = reader.read_exact(&mut body);
    String::from_utf8_lossy(&body).into_owned()
}
