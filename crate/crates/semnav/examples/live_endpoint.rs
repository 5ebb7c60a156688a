//! Drive the live HTTP provider end to end against a local loopback stub
//! that speaks the chat-completions protocol, so the example runs without
//! any network access or API key.
//!
//!     cargo run -p semnav --example live_endpoint
//!
//! Point `ClientConfig` at a real endpoint and set the API key variable to
//! use an actual model instead.

use std::io::{Read, Write};
use std::net::TcpListener;

use semnav::harness::{builtin, render_report, run_trials, ReportFormat};
use semnav::llm_client::{ClientConfig, LiveProvider};

/// Minimal chat-completions stub: always selects candidate 0 with buffer 0.
fn spawn_stub() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut buf = [0u8; 65536];
            let _ = stream.read(&mut buf);
            let content =
                "{\\\"mode\\\":\\\"candidate_selection\\\", \\\"selected_candidate\\\":0, \\\"buffer\\\":0}";
            let body = format!(
                "{{\"choices\":[{{\"message\":{{\"role\":\"assistant\",\"content\":\"{content}\"}}}}]}}"
            );
            let reply = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    url
}

fn main() {
    let endpoint_url = spawn_stub();
    println!("stub endpoint: {endpoint_url}");

    let config = ClientConfig {
        endpoint_url,
        model_name: "gpt-4".to_string(),
        api_key_env: String::new(), // no auth for the local stub
        timeout_s: 10.0,
        max_retries: 2,
        rate_limit_per_min: Some(600.0),
        ..ClientConfig::default()
    };
    let provider = LiveProvider::new(config).unwrap();

    let scenario = builtin("toxic").unwrap();
    let report = run_trials(&scenario, 3, &provider, 5);
    print!("{}", render_report(&report, ReportFormat::Text));
    println!(
        "note: the stub always answers candidate 0, which is the clear goal \
         in this scenario, so compliance is 100%"
    );
}
