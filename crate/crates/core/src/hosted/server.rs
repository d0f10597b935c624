//! Serves a [`MockProvider`] over real HTTP, for driving the CLI end to end.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::mock::MockProvider;
use super::transport::{HttpRequest, Method, Transport};
use super::HostedError;

pub struct MockServer {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Bind `addr` (use port 0 for an ephemeral port) and start serving.
    pub fn start(addr: &str, provider: MockProvider) -> Result<Self, HostedError> {
        let server = tiny_http::Server::http(addr)
            .map_err(|e| HostedError::Validation(format!("cannot bind mock server on {addr}: {e}")))?;
        let bound = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| HostedError::Validation("mock server bound to a non-IP address".into()))?;
        let server = Arc::new(server);
        let srv = Arc::clone(&server);
        let worker = thread::Builder::new()
            .name("mock-server".into())
            .spawn(move || {
                for request in srv.incoming_requests() {
                    serve(&provider, request);
                }
            })
            .map_err(|e| HostedError::Validation(format!("cannot spawn mock server: {e}")))?;
        Ok(MockServer { server, addr: bound, worker: Some(worker) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL clients should use, including the `/v1` prefix.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Block until the server is shut down from another thread or process exit.
    pub fn join(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn serve(provider: &MockProvider, mut request: tiny_http::Request) {
    let method = match request.method() {
        tiny_http::Method::Get => Method::Get,
        tiny_http::Method::Post => Method::Post,
        _ => {
            let _ = request.respond(tiny_http::Response::empty(405));
            return;
        }
    };
    let mut req = HttpRequest::new(method, request.url().to_string());
    for h in request.headers() {
        req.headers.push((h.field.as_str().as_str().to_string(), h.value.as_str().to_string()));
    }
    let mut body = Vec::new();
    if request.as_reader().read_to_end(&mut body).is_err() {
        let _ = request.respond(tiny_http::Response::empty(400));
        return;
    }
    req.body = body;
    match provider.send(&req) {
        Ok(resp) => {
            let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
            let _ = request.respond(tiny_http::Response::from_data(resp.body).with_status_code(resp.status).with_header(header));
        }
        // Simulate a dropped connection: close without a response.
        Err(_) => drop(request.into_writer()),
    }
}
