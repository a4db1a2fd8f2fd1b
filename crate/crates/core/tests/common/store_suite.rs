//! Black-box checks of the store over its TCP protocol.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Instant;

use lethe::schedule::YEAR_SECONDS;
use lethe::store::{ManualClock, Server, Store, StoreConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    fn connect(server: &Server) -> Self {
        let s = TcpStream::connect(server.local_addr()).unwrap();
        s.set_nodelay(true).unwrap();
        Client {
            reader: BufReader::new(s.try_clone().unwrap()),
            writer: s,
        }
    }

    fn raw(&mut self, line: &str) -> String {
        self.writer
            .write_all(format!("{line}\n").as_bytes())
            .unwrap();
        let mut out = String::new();
        self.reader.read_line(&mut out).unwrap();
        out
    }

    fn call(&mut self, v: Value) -> String {
        self.raw(&v.to_string())
    }

    fn put(&mut self, content: &str, token: &str) -> String {
        let r: Value = serde_json::from_str(
            &self.call(json!({"op": "put", "content": content, "token": token})),
        )
        .unwrap();
        assert_eq!(r["status"], "ok");
        r["post_id"].as_str().unwrap().to_string()
    }

    fn get(&mut self, id: &str, token: &str) -> String {
        self.call(json!({"op": "get", "post_id": id, "token": token}))
    }

    fn delete(&mut self, id: &str, token: &str) -> String {
        self.call(json!({"op": "delete", "post_id": id, "token": token}))
    }
}

const NULL: &str = "{\"status\":\"ok\",\"content\":null}\n";
const UNAUTHORIZED: &str = "{\"status\":\"error\",\"code\":\"unauthorized\"}\n";

fn content(c: &str) -> String {
    format!("{{\"status\":\"ok\",\"content\":{}}}\n", Value::from(c))
}

fn start(now: u64) -> (Arc<Store>, Arc<ManualClock>, Server) {
    let clock = Arc::new(ManualClock::new(now));
    let store = Arc::new(
        Store::in_memory(
            StoreConfig {
                availability: 0.9,
                mean_down: 3600.0,
                theta_star: 30.0 * 86_400.0,
                seed: 5,
            },
            clock.clone(),
        )
        .unwrap(),
    );
    let server = Server::bind("127.0.0.1:0", Arc::clone(&store)).unwrap();
    (store, clock, server)
}

/// Start of the first down phase of `id` after `from`.
fn next_down(store: &Store, id: &str, from: u64) -> u64 {
    let r = store.inspect(id).unwrap();
    let t = r.schedule.toggles();
    let i = t.partition_point(|&x| x <= from);
    t[if i % 2 == 0 { i } else { i + 1 }]
}

pub fn owner_bypasses_the_schedule() {
    let (store, clock, server) = start(1_000);
    let mut c = Client::connect(&server);
    let id = c.put("hello", "alice");
    assert_eq!(c.get(&id, "bob"), content("hello"));
    clock.set(next_down(&store, &id, 1_000));
    assert_eq!(c.get(&id, "bob"), NULL);
    assert_eq!(c.get(&id, "alice"), content("hello"));
}

pub fn hidden_deleted_and_unknown_read_identically() {
    let (store, clock, server) = start(0);
    let mut c = Client::connect(&server);
    let hidden = c.put("a", "alice");
    let deleted = c.put("b", "alice");
    assert_eq!(c.delete(&deleted, "alice"), "{\"status\":\"ok\"}\n");
    clock.set(next_down(&store, &hidden, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let unknown: String = (0..32)
        .map(|_| format!("{:x}", rng.gen_range(0..16)))
        .collect();
    let responses = [
        c.get(&hidden, "eve"),
        c.get(&deleted, "eve"),
        c.get(&deleted, "alice"),
        c.get(&unknown, "eve"),
    ];
    for r in &responses {
        assert_eq!(r.as_bytes(), NULL.as_bytes());
    }
}

pub fn failed_deletes_are_indistinguishable() {
    let (_, _, server) = start(0);
    let mut c = Client::connect(&server);
    let id = c.put("x", "alice");
    let wrong = c.delete(&id, "mallory");
    assert_eq!(c.get(&id, "alice"), content("x"));
    assert_eq!(c.delete(&id, "alice"), "{\"status\":\"ok\"}\n");
    let twice = c.delete(&id, "alice");
    let unknown = c.delete("0123456789abcdef0123456789abcdef", "alice");
    assert_eq!(wrong, UNAUTHORIZED);
    assert_eq!(twice, UNAUTHORIZED);
    assert_eq!(unknown, UNAUTHORIZED);
}

pub fn deletion_is_permanent() {
    let (store, clock, server) = start(0);
    let mut c = Client::connect(&server);
    let id = c.put("gone", "alice");
    c.delete(&id, "alice");
    for step in 0..50u64 {
        clock.advance(3 * 3600 + step * 7919);
        assert_eq!(c.get(&id, "alice"), NULL);
        assert_eq!(c.get(&id, "bob"), NULL);
    }
    clock.set(2 * YEAR_SECONDS);
    store.update_expiring().unwrap();
    assert_eq!(c.get(&id, "alice"), NULL);
    assert_eq!(store.inspect(&id).unwrap().content, None);
}

pub fn lazy_extension_keeps_the_past() {
    let (store, clock, server) = start(0);
    let mut c = Client::connect(&server);
    let ids: Vec<String> = (0..20).map(|i| c.put(&format!("p{i}"), "alice")).collect();
    let probes: Vec<u64> = (0..2000).map(|i| i * (YEAR_SECONDS / 2000)).collect();
    let before: Vec<Vec<bool>> = ids
        .iter()
        .map(|id| {
            let r = store.inspect(id).unwrap();
            probes
                .iter()
                .map(|&t| r.schedule.is_up(t).unwrap())
                .collect()
        })
        .collect();
    clock.set(YEAR_SECONDS / 2);
    assert_eq!(store.update_expiring().unwrap().extended, ids.len());
    clock.set(3 * YEAR_SECONDS);
    // a read past coverage extends on demand
    c.get(&ids[0], "bob");
    assert!(store.coverage(&ids[0]).unwrap() >= 3 * YEAR_SECONDS);
    for (id, b) in ids.iter().zip(&before) {
        let r = store.inspect(id).unwrap();
        let after: Vec<bool> = probes
            .iter()
            .map(|&t| r.schedule.is_up(t).unwrap())
            .collect();
        assert_eq!(&after, b);
    }
}

pub fn malformed_requests_are_rejected() {
    let (_, _, server) = start(0);
    let mut c = Client::connect(&server);
    let bad = "{\"status\":\"error\",\"code\":\"bad_request\"}\n";
    assert_eq!(c.raw("not json"), bad);
    assert_eq!(c.raw("{\"op\":\"update_ts\"}"), bad);
    assert_eq!(
        c.raw("{\"op\":\"put\",\"content\":\"\",\"token\":\"t\"}"),
        bad
    );
    assert_eq!(c.raw("{\"op\":\"get\",\"post_id\":\"x\"}"), bad);
}

#[derive(Debug, Clone)]
struct Op {
    post: usize,
    kind: Kind,
    owner: bool,
    start: Instant,
    end: Instant,
    response: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Get,
    Delete,
}

/// 10⁴ gets and deletes from eight connections against 40 posts. The clock is
/// frozen at creation, inside every post's initial up phase, so a get returns
/// the content exactly when it takes effect before the one successful delete.
pub fn concurrent_operations_are_linearizable_per_post() {
    let (_, _, server) = start(10);
    let mut setup = Client::connect(&server);
    let posts: Vec<(String, String)> = (0..40)
        .map(|i| {
            (
                setup.put(&format!("c{i}"), &format!("owner{i}")),
                format!("c{i}"),
            )
        })
        .collect();
    let posts = Arc::new(posts);
    let server = Arc::new(server);

    let handles: Vec<_> = (0..8u64)
        .map(|w| {
            let posts = Arc::clone(&posts);
            let server = Arc::clone(&server);
            std::thread::spawn(move || {
                let mut c = Client::connect(&server);
                let mut rng = ChaCha8Rng::seed_from_u64(w);
                let mut log = Vec::with_capacity(1250);
                for _ in 0..1250 {
                    let post = rng.gen_range(0..posts.len());
                    let owner = rng.gen_bool(0.5);
                    let token = if owner {
                        format!("owner{post}")
                    } else {
                        "stranger".to_string()
                    };
                    let kind = if rng.gen_bool(0.05) {
                        Kind::Delete
                    } else {
                        Kind::Get
                    };
                    let start = Instant::now();
                    let response = match kind {
                        Kind::Get => c.get(&posts[post].0, &token),
                        Kind::Delete => c.delete(&posts[post].0, &token),
                    };
                    log.push(Op {
                        post,
                        kind,
                        owner,
                        start,
                        end: Instant::now(),
                        response,
                    });
                }
                log
            })
        })
        .collect();
    let ops: Vec<Op> = handles
        .into_iter()
        .flat_map(|h| h.join().unwrap())
        .collect();
    assert_eq!(ops.len(), 10_000);

    for (p, (_, text)) in posts.iter().enumerate() {
        let mine: Vec<&Op> = ops.iter().filter(|o| o.post == p).collect();
        let ok_deletes: Vec<&&Op> = mine
            .iter()
            .filter(|o| o.kind == Kind::Delete && o.response == "{\"status\":\"ok\"}\n")
            .collect();
        assert!(ok_deletes.len() <= 1, "post {p} deleted twice");
        for o in mine.iter().filter(|o| o.kind == Kind::Delete) {
            if !o.owner {
                assert_eq!(o.response, UNAUTHORIZED);
            }
        }
        let gets: Vec<&&Op> = mine.iter().filter(|o| o.kind == Kind::Get).collect();
        for g in &gets {
            assert!(
                g.response == content(text) || g.response == NULL,
                "{}",
                g.response
            );
        }
        match ok_deletes.first() {
            None => {
                assert!(mine
                    .iter()
                    .filter(|o| o.kind == Kind::Delete)
                    .all(|o| !o.owner));
                assert!(gets.iter().all(|g| g.response == content(text)));
            }
            Some(d) => {
                for g in &gets {
                    if g.end < d.start {
                        assert_eq!(g.response, content(text));
                    }
                    if g.start > d.end {
                        assert_eq!(g.response, NULL);
                    }
                }
                // owner deletes that began after the successful one finished must fail
                for o in mine
                    .iter()
                    .filter(|o| o.kind == Kind::Delete && o.owner && o.start > d.end)
                {
                    assert_eq!(o.response, UNAUTHORIZED);
                }
                // once a get has seen the deletion, no later get sees the content
                let first_null = gets
                    .iter()
                    .filter(|g| g.response == NULL)
                    .map(|g| g.end)
                    .min();
                if let Some(t) = first_null {
                    assert!(gets
                        .iter()
                        .filter(|g| g.start > t)
                        .all(|g| g.response == NULL));
                }
            }
        }
    }
}
