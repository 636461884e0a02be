//! Axum routes over [`AuthService`]. Service calls may run the slow hash,
//! so every one goes through `spawn_blocking`.

use std::net::{IpAddr, SocketAddr};
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{ConnectInfo, DefaultBodyLimit, FromRequestParts, Path, State};
use axum::http::request::Parts;
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use crate::error::ServiceError;
use crate::service::AuthService;
use crate::views::{KeyRequest, PackUpload, StartRequest, MEDIA_TYPE, SESSION_HEADER};

const PACK_UPLOAD_LIMIT: usize = 64 * 1024 * 1024;

type Shared = Arc<AuthService>;

pub fn router(service: Shared) -> Router {
    Router::new()
        .route("/register/start", post(register_start))
        .route("/register/study", get(register_study))
        .route("/register/key", post(register_key))
        .route("/login/start", post(login_start))
        .route("/login/key", post(login_key))
        .route("/login/finalize", post(login_finalize))
        .route("/assets/{asset_ref}", get(asset))
        .route("/healthz", get(healthz))
        .route(
            "/admin/pack",
            post(upload_pack).layer(DefaultBodyLimit::max(PACK_UPLOAD_LIMIT)),
        )
        .with_state(service)
}

/// Binds `addr` and serves until ctrl-c.
pub async fn serve(service: Shared, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(
        listener,
        router(service).into_make_service_with_connect_info::<SocketAddr>(),
    )
    .with_graceful_shutdown(async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

struct Api<T>(StatusCode, T);

impl<T: Serialize> IntoResponse for Api<T> {
    fn into_response(self) -> Response {
        match serde_json::to_vec(&self.1) {
            Ok(body) => (
                self.0,
                [
                    (header::CONTENT_TYPE, HeaderValue::from_static(MEDIA_TYPE)),
                    (header::CACHE_CONTROL, HeaderValue::from_static("no-store")),
                ],
                body,
            )
                .into_response(),
            Err(e) => ServiceError::Internal(e.to_string()).into_response(),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let retry_after = match &self {
            ServiceError::Locked { retry_after_secs }
            | ServiceError::RateLimited { retry_after_secs } => Some(*retry_after_secs),
            _ => None,
        };
        let mut response = Api(status, self.body()).into_response();
        if let Some(secs) = retry_after {
            response
                .headers_mut()
                .insert(header::RETRY_AFTER, HeaderValue::from(secs));
        }
        response
    }
}

/// Peer address when the server was started with connect info.
struct Source(Option<IpAddr>);

impl<S: Send + Sync> FromRequestParts<S> for Source {
    type Rejection = std::convert::Infallible;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> Result<Self, Self::Rejection> {
        Ok(Source(
            parts
                .extensions
                .get::<ConnectInfo<SocketAddr>>()
                .map(|ConnectInfo(addr)| addr.ip()),
        ))
    }
}

fn session_id(headers: &HeaderMap) -> Result<String, ServiceError> {
    headers
        .get(SESSION_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|v| !v.is_empty())
        .map(str::to_owned)
        .ok_or_else(|| ServiceError::BadRequest(format!("missing {SESSION_HEADER} header")))
}

fn bearer(headers: &HeaderMap) -> Option<String> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(|t| t.trim().to_owned())
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn blocking<T, F>(service: Shared, status: StatusCode, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&AuthService) -> Result<T, ServiceError> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&service)).await {
        Ok(Ok(value)) => Api(status, value).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ServiceError::Internal(e.to_string()).into_response(),
    }
}

async fn register_start(
    State(svc): State<Shared>,
    headers: HeaderMap,
    payload: Result<Json<StartRequest>, JsonRejection>,
) -> Response {
    let req = match body(payload) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    let token = bearer(&headers);
    blocking(svc, StatusCode::OK, move |s| {
        s.register_start(token.as_deref(), &req.user_id)
    })
    .await
}

async fn register_study(State(svc): State<Shared>, headers: HeaderMap) -> Response {
    match session_id(&headers) {
        Ok(id) => blocking(svc, StatusCode::OK, move |s| s.register_study(&id)).await,
        Err(e) => e.into_response(),
    }
}

async fn register_key(
    State(svc): State<Shared>,
    headers: HeaderMap,
    payload: Result<Json<KeyRequest>, JsonRejection>,
) -> Response {
    let (id, req) = match session_id(&headers).and_then(|id| Ok((id, body(payload)?))) {
        Ok(v) => v,
        Err(e) => return e.into_response(),
    };
    match tokio::task::spawn_blocking(move || svc.register_key(&id, &req.key)).await {
        Ok(Ok(view @ crate::views::StepView::Registered { .. })) => {
            Api(StatusCode::CREATED, view).into_response()
        }
        Ok(Ok(view)) => Api(StatusCode::OK, view).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ServiceError::Internal(e.to_string()).into_response(),
    }
}

async fn login_start(
    State(svc): State<Shared>,
    Source(source): Source,
    payload: Result<Json<StartRequest>, JsonRejection>,
) -> Response {
    match body(payload) {
        Ok(req) => {
            blocking(svc, StatusCode::OK, move |s| {
                s.login_start(&req.user_id, source)
            })
            .await
        }
        Err(e) => e.into_response(),
    }
}

async fn login_key(
    State(svc): State<Shared>,
    headers: HeaderMap,
    payload: Result<Json<KeyRequest>, JsonRejection>,
) -> Response {
    match session_id(&headers).and_then(|id| Ok((id, body(payload)?))) {
        Ok((id, req)) => blocking(svc, StatusCode::OK, move |s| s.login_key(&id, &req.key)).await,
        Err(e) => e.into_response(),
    }
}

async fn login_finalize(State(svc): State<Shared>, headers: HeaderMap) -> Response {
    match session_id(&headers) {
        Ok(id) => blocking(svc, StatusCode::OK, move |s| s.login_finalize(&id)).await,
        Err(e) => e.into_response(),
    }
}

async fn asset(
    State(svc): State<Shared>,
    Path(asset_ref): Path<String>,
    headers: HeaderMap,
) -> Response {
    let Some(asset) = svc.asset(&asset_ref) else {
        return ServiceError::NotFound.into_response();
    };
    let etag = format!("\"{asset_ref}\"");
    let fresh = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
    let mut response = if fresh {
        StatusCode::NOT_MODIFIED.into_response()
    } else {
        let mut r = Response::new(Body::from(asset.bytes.to_vec()));
        r.headers_mut().insert(
            header::CONTENT_TYPE,
            HeaderValue::from_static(asset.content_type),
        );
        r
    };
    let h = response.headers_mut();
    h.insert(
        header::ETAG,
        HeaderValue::from_str(&etag).expect("hex etag"),
    );
    h.insert(
        header::CACHE_CONTROL,
        HeaderValue::from_static("public, max-age=31536000, immutable"),
    );
    response
}

async fn healthz(State(svc): State<Shared>) -> Response {
    Api(StatusCode::OK, svc.health()).into_response()
}

async fn upload_pack(
    State(svc): State<Shared>,
    headers: HeaderMap,
    payload: Result<Json<PackUpload>, JsonRejection>,
) -> Response {
    let token = bearer(&headers);
    match body(payload) {
        Ok(upload) => {
            blocking(svc, StatusCode::CREATED, move |s| {
                s.upload_pack(token.as_deref(), upload)
            })
            .await
        }
        Err(e) => e.into_response(),
    }
}
