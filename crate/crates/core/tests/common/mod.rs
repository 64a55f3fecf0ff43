//! Shared test support: an in-process S3-compatible mock and brute-force oracles.
#![allow(dead_code)]

pub mod oracles;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use chrono::NaiveDateTime;
use orbitforge::storage::sigv4::{self, SigningRequest};
use orbitforge::storage::{BucketNames, Credentials, RetryPolicy, S3Config, S3Store};
use percent_encoding::percent_decode_str;
use tiny_http::{Header, Method, Response, Server};

pub const REGION: &str = "us-east-1";

pub fn credentials() -> Credentials {
    Credentials {
        access_key_id: "MOCKACCESSKEY".into(),
        secret_key: "mock/secret+key".into(),
    }
}

#[derive(Default)]
struct State {
    objects: BTreeMap<(String, String), Vec<u8>>,
}

/// Serves PUT/GET/HEAD/DELETE on objects and ListObjectsV2 on buckets,
/// path-style, and rejects requests whose signature does not verify.
pub struct MockS3 {
    server: Arc<Server>,
    handle: Option<JoinHandle<()>>,
    state: Arc<Mutex<State>>,
    /// Number of upcoming requests to answer with 503.
    pub fail_next: Arc<AtomicUsize>,
    pub requests: Arc<AtomicUsize>,
    pub port: u16,
}

impl MockS3 {
    /// `page_size` caps keys per list page so pagination gets exercised.
    pub fn start(page_size: usize) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind mock server"));
        let port = server.server_addr().to_ip().unwrap().port();
        let state = Arc::new(Mutex::new(State::default()));
        let fail_next = Arc::new(AtomicUsize::new(0));
        let requests = Arc::new(AtomicUsize::new(0));
        let handle = {
            let (server, state, fail_next, requests) =
                (server.clone(), state.clone(), fail_next.clone(), requests.clone());
            std::thread::spawn(move || {
                for mut req in server.incoming_requests() {
                    requests.fetch_add(1, Ordering::SeqCst);
                    let mut body = Vec::new();
                    let _ = req.as_reader().read_to_end(&mut body);
                    let injected = fail_next
                        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                        .is_ok();
                    let (status, payload) = if injected {
                        (503, error_xml("SlowDown", "injected failure"))
                    } else {
                        handle(&req, &body, &state, page_size)
                    };
                    let _ = req.respond(Response::from_data(payload).with_status_code(status));
                }
            })
        };
        MockS3 { server, handle: Some(handle), state, fail_next, requests, port }
    }

    pub fn endpoint(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    pub fn store(&self) -> S3Store {
        self.store_with(credentials(), RetryPolicy::none())
    }

    pub fn store_with(&self, creds: Credentials, retry: RetryPolicy) -> S3Store {
        let mut cfg = S3Config::new(&self.endpoint(), REGION, creds).unwrap();
        cfg.retry = retry;
        S3Store::new(cfg, BucketNames::default())
    }

    /// Snapshot of `(bucket, key) -> bytes`.
    pub fn objects(&self) -> BTreeMap<(String, String), Vec<u8>> {
        self.state.lock().unwrap().objects.clone()
    }
}

impl Drop for MockS3 {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn error_xml(code: &str, message: &str) -> Vec<u8> {
    format!("<?xml version=\"1.0\"?><Error><Code>{code}</Code><Message>{message}</Message></Error>").into_bytes()
}

fn header<'a>(req: &'a tiny_http::Request, name: &str) -> Option<&'a str> {
    req.headers()
        .iter()
        .find(|h: &&Header| h.field.as_str().as_str().eq_ignore_ascii_case(name))
        .map(|h| h.value.as_str())
}

fn verify(req: &tiny_http::Request, path: &str, query: &[(String, String)], body: &[u8]) -> Result<(), String> {
    let auth = header(req, "authorization").ok_or("missing authorization")?;
    let date = header(req, "x-amz-date").ok_or("missing x-amz-date")?;
    let payload = header(req, "x-amz-content-sha256").ok_or("missing payload hash")?;
    let host = header(req, "host").ok_or("missing host")?;
    if payload != sigv4::sha256_hex(body) {
        return Err("payload hash mismatch".into());
    }
    let time = NaiveDateTime::parse_from_str(date, "%Y%m%dT%H%M%SZ")
        .map_err(|e| e.to_string())?
        .and_utc();
    let headers = vec![
        ("host".to_string(), host.to_string()),
        ("x-amz-content-sha256".to_string(), payload.to_string()),
        ("x-amz-date".to_string(), date.to_string()),
    ];
    let expected = sigv4::sign(
        &SigningRequest {
            method: req.method().as_str(),
            path,
            query,
            headers: &headers,
            payload_sha256: payload,
        },
        &credentials(),
        REGION,
        "s3",
        time,
    );
    if expected.authorization != auth {
        return Err("signature mismatch".into());
    }
    Ok(())
}

fn decode(s: &str) -> String {
    percent_decode_str(s).decode_utf8_lossy().into_owned()
}

fn handle(req: &tiny_http::Request, body: &[u8], state: &Mutex<State>, page_size: usize) -> (u16, Vec<u8>) {
    let url = req.url();
    let (raw_path, raw_query) = url.split_once('?').unwrap_or((url, ""));
    let path = decode(raw_path);
    let query: Vec<(String, String)> = raw_query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').unwrap_or((p, ""));
            (decode(k), decode(v))
        })
        .collect();
    if let Err(msg) = verify(req, &path, &query, body) {
        return (403, error_xml("SignatureDoesNotMatch", &msg));
    }
    let trimmed = path.trim_start_matches('/');
    let (bucket, key) = match trimmed.split_once('/') {
        Some((b, k)) => (b.to_string(), Some(k.to_string())),
        None => (trimmed.to_string(), None),
    };
    let mut st = state.lock().unwrap();
    match (req.method(), key) {
        (Method::Put, Some(k)) => {
            st.objects.insert((bucket, k), body.to_vec());
            (200, Vec::new())
        }
        (Method::Get, Some(k)) | (Method::Head, Some(k)) => match st.objects.get(&(bucket, k)) {
            Some(b) if *req.method() == Method::Get => (200, b.clone()),
            Some(_) => (200, Vec::new()),
            None => (404, error_xml("NoSuchKey", "The specified key does not exist.")),
        },
        (Method::Delete, Some(k)) => {
            st.objects.remove(&(bucket, k));
            (204, Vec::new())
        }
        (Method::Get, None) => {
            let get = |name: &str| query.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone());
            if get("list-type").as_deref() != Some("2") {
                return (400, error_xml("InvalidArgument", "only ListObjectsV2 is supported"));
            }
            let prefix = get("prefix").unwrap_or_default();
            let after = get("continuation-token").map(|t| String::from_utf8(hex::decode(t).unwrap()).unwrap());
            let keys: Vec<&String> = st
                .objects
                .keys()
                .filter(|(b, k)| *b == bucket && k.starts_with(&prefix))
                .map(|(_, k)| k)
                .filter(|k| after.as_ref().is_none_or(|a| *k > a))
                .collect();
            let page = &keys[..keys.len().min(page_size)];
            let truncated = keys.len() > page.len();
            let mut xml = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?><ListBucketResult>");
            xml += &format!("<Name>{bucket}</Name><KeyCount>{}</KeyCount>", page.len());
            for k in page {
                let escaped = k.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
                xml += &format!("<Contents><Key>{escaped}</Key></Contents>");
            }
            xml += &format!("<IsTruncated>{truncated}</IsTruncated>");
            if truncated {
                xml += &format!("<NextContinuationToken>{}</NextContinuationToken>", hex::encode(page.last().unwrap()));
            }
            xml += "</ListBucketResult>";
            (200, xml.into_bytes())
        }
        _ => (405, error_xml("MethodNotAllowed", "unsupported")),
    }
}
