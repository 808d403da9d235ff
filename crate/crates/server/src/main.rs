use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use modart_server::{load_session, router, AppState};

#[derive(Parser, Debug)]
#[command(name = "modart-server", version, about = "Interactive session service")]
struct Args {
    /// A session as `ID BUILD_DIR MODEL_DIR`; repeat for more sessions.
    #[arg(long, num_args = 3, value_names = ["ID", "BUILD_DIR", "MODEL_DIR"], required = true)]
    session: Vec<String>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut state = AppState::default();
    for s in args.session.chunks(3) {
        let (id, build, model) = (&s[0], PathBuf::from(&s[1]), PathBuf::from(&s[2]));
        match load_session(id, &build, &model) {
            Ok(session) => {
                log::info!("session {id}: {} modes", session.model().len());
                state.insert(session);
            }
            Err(e) => {
                eprintln!("error: session {id}: {e}");
                return ExitCode::from(if e.is_validation() { 2 } else { 3 });
            }
        }
    }
    let listener = match tokio::net::TcpListener::bind(args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: cannot bind {}: {e}", args.addr);
            return ExitCode::from(2);
        }
    };
    log::info!("listening on {}", args.addr);
    if let Err(e) = axum::serve(listener, router(state)).await {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
