//! The background refresher: keeps every vaulted credential's `.use`
//! file fresh, rewriting it before the access token runs out.

use std::sync::Arc;
use std::time::Duration;

use token_core::token::split_scopes;
use token_core::{needs_refresh, AccessToken, RefreshToken};
use tokio::task::JoinHandle;

use crate::service::ServiceState;
use crate::unix_now;

/// What the refresher did for one credential during a tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefreshAction {
    pub user: String,
    pub provider: String,
    pub outcome: RefreshOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefreshOutcome {
    Refreshed,
    /// The refresh failed; the reason is kept for the log. A provider
    /// rejection additionally marks the credential as needing
    /// re-authorization.
    Failed(String),
}

/// One pass over the vault: refresh every access token within the margin
/// of expiry. Failures are per-credential and never abort the tick.
pub async fn refresher_tick(state: &ServiceState, now: i64) -> Vec<RefreshAction> {
    let mut actions = Vec::new();
    for (user, provider) in state.layout.list_credentials() {
        // Already marked as requiring re-authorization; retrying would
        // just spam the provider.
        if state.layout.is_failed(&user, &provider) {
            continue;
        }
        let due = match state.layout.read_access(&user, &provider) {
            Ok(Some(access)) => needs_refresh(&access, now, state.refresh_margin),
            Ok(None) => true, // vaulted refresh token but no .use yet
            Err(err) => {
                actions.push(RefreshAction {
                    user,
                    provider,
                    outcome: RefreshOutcome::Failed(format!("unreadable .use file: {err}")),
                });
                continue;
            }
        };
        if !due {
            continue;
        }
        let outcome = refresh_one(state, &user, &provider, now).await;
        actions.push(RefreshAction {
            user,
            provider,
            outcome,
        });
    }
    actions
}

async fn refresh_one(state: &ServiceState, user: &str, provider: &str, now: i64) -> RefreshOutcome {
    let refresh = match state.layout.read_refresh(user, provider) {
        Ok(Some(refresh)) => refresh,
        Ok(None) => return RefreshOutcome::Failed("missing .top file".into()),
        Err(err) => return RefreshOutcome::Failed(err.to_string()),
    };
    let Some(cfg) = state.providers.get(provider) else {
        return RefreshOutcome::Failed(format!("no configuration for provider {provider}"));
    };

    match oauth_flow::refresh_access_token(&state.http, cfg, &refresh).await {
        Ok(response) => {
            let scopes = split_scopes(&response.scope);
            let access = match AccessToken::mint(
                &response.access_token,
                scopes.clone(),
                response.expires_in,
                now,
            ) {
                Ok(access) => access,
                Err(err) => return RefreshOutcome::Failed(err.to_string()),
            };
            let lock = state.user_lock(user);
            let _guard = lock.lock().await;
            if let Err(err) = state.layout.write_access(user, provider, &access) {
                return RefreshOutcome::Failed(err.to_string());
            }
            if let Some(rotated) = response.refresh_token.as_deref() {
                if rotated != refresh.token {
                    let new_refresh = match RefreshToken::new(rotated, now, scopes) {
                        Ok(refresh) => refresh,
                        Err(err) => return RefreshOutcome::Failed(err.to_string()),
                    };
                    if let Err(err) = state.layout.write_refresh(user, provider, &new_refresh) {
                        return RefreshOutcome::Failed(err.to_string());
                    }
                }
            }
            RefreshOutcome::Refreshed
        }
        Err(oauth_flow::Error::ProviderRejected { status, body }) => {
            // Revoked or otherwise refused: mark for re-authorization and
            // leave the current .use untouched.
            if let Err(err) = state.layout.mark_failed(user, provider) {
                tracing::error!("failed to mark {user}/{provider}: {err}");
            }
            RefreshOutcome::Failed(format!("provider rejected refresh ({status}): {body}"))
        }
        Err(err) => RefreshOutcome::Failed(err.to_string()),
    }
}

/// Exactly one refresher task runs per service instance.
pub(crate) fn spawn_refresher(state: Arc<ServiceState>, interval: Duration) -> JoinHandle<()> {
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(interval);
        ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            ticker.tick().await;
            for action in refresher_tick(&state, unix_now()).await {
                match &action.outcome {
                    RefreshOutcome::Refreshed => {
                        tracing::info!("refreshed {}/{}", action.user, action.provider)
                    }
                    RefreshOutcome::Failed(reason) => {
                        tracing::warn!(
                            "refresh failed for {}/{}: {reason}",
                            action.user,
                            action.provider
                        )
                    }
                }
            }
        }
    })
}
