use std::time::Duration;

use chrono::Utc;
use quick_xml::events::Event;
use quick_xml::Reader;
use ureq::Agent;
use url::Url;

use super::sigv4::{self, Credentials, SigningRequest};
use super::{validate_prefix, BucketNames, BucketRole, ObjectKey, ObjectStore};
use crate::error::{Error, Result};

/// Retry schedule for transient failures (network errors, 429 and 5xx).
/// Other 4xx responses are returned immediately.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Waits before each retry; the number of entries is the retry count.
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            backoff: [1, 2, 4].map(Duration::from_secs).to_vec(),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { backoff: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct S3Config {
    pub endpoint: Url,
    pub region: String,
    pub credentials: Credentials,
    /// `{endpoint}/{bucket}/{key}` instead of `{bucket}.{host}/{key}`.
    pub path_style: bool,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

impl S3Config {
    /// Path-style addressing and the default retry schedule.
    pub fn new(endpoint: &str, region: &str, credentials: Credentials) -> Result<Self> {
        let endpoint = Url::parse(endpoint)
            .map_err(|e| Error::Config(format!("invalid storage endpoint '{endpoint}': {e}")))?;
        if !matches!(endpoint.scheme(), "http" | "https") || endpoint.host_str().is_none() {
            return Err(Error::Config(format!("storage endpoint must be an http(s) URL: {endpoint}")));
        }
        Ok(Self {
            endpoint,
            region: region.to_string(),
            credentials,
            path_style: true,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(60),
        })
    }
}

/// S3 REST client (PUT/GET/HEAD/DELETE object, ListObjectsV2) signed with SigV4.
#[derive(Debug)]
pub struct S3Store {
    config: S3Config,
    buckets: BucketNames,
    agent: Agent,
}

struct Reply {
    status: u16,
    body: Vec<u8>,
}

impl S3Store {
    pub fn new(config: S3Config, buckets: BucketNames) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        Self {
            config,
            buckets,
            agent,
        }
    }

    /// Authority (host[:port]) and unencoded path for an object or bucket.
    fn locate(&self, bucket: &str, key: Option<&str>) -> (String, String) {
        let ep = &self.config.endpoint;
        let host = ep.host_str().expect("validated endpoint has a host");
        let port = ep.port().map(|p| format!(":{p}")).unwrap_or_default();
        let base = ep.path().trim_end_matches('/');
        let key_part = key.map(|k| format!("/{k}")).unwrap_or_else(|| "/".to_string());
        if self.config.path_style {
            let path = match key {
                Some(k) => format!("{base}/{bucket}/{k}"),
                None => format!("{base}/{bucket}"),
            };
            (format!("{host}{port}"), path)
        } else {
            (format!("{bucket}.{host}{port}"), format!("{base}{key_part}"))
        }
    }

    fn request(
        &self,
        method: &str,
        bucket: &str,
        key: Option<&str>,
        query: &[(String, String)],
        body: &[u8],
    ) -> Result<Reply> {
        let (authority, path) = self.locate(bucket, key);
        let mut url = format!(
            "{}://{authority}{}",
            self.config.endpoint.scheme(),
            sigv4::encode_path(&path)
        );
        let qs = sigv4::canonical_query(query);
        if !qs.is_empty() {
            url.push('?');
            url.push_str(&qs);
        }
        let payload_hash = sigv4::sha256_hex(body);

        let mut attempt = 0;
        loop {
            let now = Utc::now();
            let headers = vec![
                ("host".to_string(), authority.clone()),
                ("x-amz-content-sha256".to_string(), payload_hash.clone()),
                ("x-amz-date".to_string(), sigv4::amz_date(now)),
            ];
            let sig = sigv4::sign(
                &SigningRequest {
                    method,
                    path: &path,
                    query,
                    headers: &headers,
                    payload_sha256: &payload_hash,
                },
                &self.config.credentials,
                &self.config.region,
                "s3",
                now,
            );
            let result = self.send(method, &url, &headers[1..], &sig.authorization, body);
            let retryable = match &result {
                Ok(r) => r.status == 429 || r.status >= 500,
                Err(_) => true,
            };
            if !retryable || attempt >= self.config.retry.backoff.len() {
                return result;
            }
            let wait = self.config.retry.backoff[attempt];
            log::warn!("{method} {url} failed ({}), retrying in {wait:?}", describe(&result));
            std::thread::sleep(wait);
            attempt += 1;
        }
    }

    fn send(
        &self,
        method: &str,
        url: &str,
        headers: &[(String, String)],
        authorization: &str,
        body: &[u8],
    ) -> Result<Reply> {
        macro_rules! with_headers {
            ($builder:expr) => {{
                let mut b = $builder.header("authorization", authorization);
                for (k, v) in headers {
                    b = b.header(k.as_str(), v.as_str());
                }
                b
            }};
        }
        let response = match method {
            "GET" => with_headers!(self.agent.get(url)).call(),
            "HEAD" => with_headers!(self.agent.head(url)).call(),
            "DELETE" => with_headers!(self.agent.delete(url)).call(),
            "PUT" => with_headers!(self.agent.put(url)).send(body),
            other => return Err(Error::Internal(format!("unsupported method {other}"))),
        };
        let mut response = response.map_err(|e| Error::Network(format!("{method} {url}: {e}")))?;
        let status = response.status().as_u16();
        let body = if method == "HEAD" {
            Vec::new()
        } else {
            response
                .body_mut()
                .with_config()
                .limit(u64::MAX)
                .read_to_vec()
                .map_err(|e| Error::Network(format!("{method} {url}: reading body: {e}")))?
        };
        Ok(Reply { status, body })
    }

    fn bucket(&self, role: BucketRole) -> &str {
        self.buckets.name(role)
    }
}

fn describe(r: &Result<Reply>) -> String {
    match r {
        Ok(r) => format!("HTTP {}", r.status),
        Err(e) => e.to_string(),
    }
}

fn transfer_error(status: u16, body: &[u8]) -> Error {
    let text = String::from_utf8_lossy(body);
    let message = xml_field(&text, "Message")
        .or_else(|| xml_field(&text, "Code"))
        .unwrap_or_else(|| text.chars().take(200).collect());
    Error::Transfer { status, message }
}

fn xml_field(text: &str, name: &str) -> Option<String> {
    let start = text.find(&format!("<{name}>"))? + name.len() + 2;
    let end = text[start..].find(&format!("</{name}>"))? + start;
    Some(text[start..end].to_string())
}

/// One page of a ListObjectsV2 response.
#[derive(Debug, Default, PartialEq)]
pub(crate) struct ListPage {
    pub keys: Vec<String>,
    pub next_token: Option<String>,
}

pub(crate) fn parse_list_page(xml: &str) -> Result<ListPage> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);
    let mut path: Vec<String> = Vec::new();
    let mut page = ListPage::default();
    let mut truncated = false;
    loop {
        let event = reader
            .read_event()
            .map_err(|e| Error::Network(format!("malformed list response: {e}")))?;
        match event {
            Event::Start(e) => path.push(String::from_utf8_lossy(e.local_name().as_ref()).into_owned()),
            Event::End(_) => {
                path.pop();
            }
            Event::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|e| Error::Network(format!("malformed list response: {e}")))?
                    .into_owned();
                let tail: Vec<&str> = path.iter().rev().take(2).map(String::as_str).collect();
                match tail.as_slice() {
                    ["Key", "Contents", ..] => page.keys.push(text),
                    ["IsTruncated", ..] => truncated = text == "true",
                    ["NextContinuationToken", ..] => page.next_token = Some(text),
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !truncated {
        page.next_token = None;
    } else if page.next_token.is_none() {
        return Err(Error::Network("truncated list response without continuation token".into()));
    }
    Ok(page)
}

impl ObjectStore for S3Store {
    fn put(&self, key: &ObjectKey, bytes: &[u8]) -> Result<()> {
        let r = self.request("PUT", self.bucket(key.role()), Some(key.key()), &[], bytes)?;
        match r.status {
            200..=299 => Ok(()),
            s => Err(transfer_error(s, &r.body)),
        }
    }

    fn get(&self, key: &ObjectKey) -> Result<Vec<u8>> {
        let r = self.request("GET", self.bucket(key.role()), Some(key.key()), &[], &[])?;
        match r.status {
            200..=299 => Ok(r.body),
            404 => Err(Error::NotFound(key.to_string())),
            s => Err(transfer_error(s, &r.body)),
        }
    }

    fn list(&self, role: BucketRole, prefix: &str) -> Result<Vec<String>> {
        validate_prefix(prefix)?;
        let mut keys = Vec::new();
        let mut token: Option<String> = None;
        loop {
            let mut query = vec![
                ("list-type".to_string(), "2".to_string()),
                ("prefix".to_string(), prefix.to_string()),
            ];
            if let Some(t) = &token {
                query.push(("continuation-token".to_string(), t.clone()));
            }
            let r = self.request("GET", self.bucket(role), None, &query, &[])?;
            match r.status {
                200..=299 => {}
                404 => return Ok(Vec::new()),
                s => return Err(transfer_error(s, &r.body)),
            }
            let page = parse_list_page(&String::from_utf8_lossy(&r.body))?;
            keys.extend(page.keys);
            match page.next_token {
                Some(t) => token = Some(t),
                None => break,
            }
        }
        keys.sort();
        keys.dedup();
        Ok(keys)
    }

    fn exists(&self, key: &ObjectKey) -> Result<bool> {
        let r = self.request("HEAD", self.bucket(key.role()), Some(key.key()), &[], &[])?;
        match r.status {
            200..=299 => Ok(true),
            404 => Ok(false),
            s => Err(transfer_error(s, &r.body)),
        }
    }

    fn delete(&self, key: &ObjectKey) -> Result<()> {
        let r = self.request("DELETE", self.bucket(key.role()), Some(key.key()), &[], &[])?;
        match r.status {
            200..=299 | 404 => Ok(()),
            s => Err(transfer_error(s, &r.body)),
        }
    }

    fn describe(&self) -> String {
        format!("s3:{}", self.config.endpoint)
    }
}
