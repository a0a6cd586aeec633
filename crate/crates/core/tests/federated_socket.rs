//! One federated round over the loopback socket transport: clients send
//! their parameters as framed messages, the server aggregates and broadcasts,
//! and the result matches the in-process aggregation bit for bit.

use gridflc_core::federated::transport::{read_message, write_message, Message, MessageKind};
use gridflc_core::federated::{deserialize_params, fedavg_aggregate, serialize_params};
use gridflc_core::kan::{Architecture, ChebyKanModel};
use std::net::{TcpListener, TcpStream};
use std::thread;

#[test]
fn loopback_round_matches_in_process_aggregation() {
    let arch = Architecture::uniform_degree(vec![3, 8, 1], 5);
    let clients: Vec<ChebyKanModel> = (0..3)
        .map(|i| ChebyKanModel::init(&arch, 900 + i).unwrap())
        .collect();
    let expected = fedavg_aggregate(&clients).unwrap();

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let n_clients = clients.len();

    let server = thread::spawn(move || {
        let mut conns: Vec<TcpStream> = Vec::new();
        let mut received: Vec<Option<Vec<f64>>> = vec![None; n_clients];
        for _ in 0..n_clients {
            let (mut stream, _) = listener.accept().unwrap();
            let msg = read_message(&mut stream).unwrap();
            assert_eq!(msg.kind, MessageKind::Params);
            assert_eq!(msg.round, 0);
            let id = msg.client_id.expect("params frames carry the client id");
            received[id] = Some(msg.params);
            conns.push(stream);
        }
        let models: Vec<ChebyKanModel> = received
            .into_iter()
            .map(|p| {
                deserialize_params(
                    &p.expect("all clients reported"),
                    &Architecture::uniform_degree(vec![3, 8, 1], 5),
                )
                .unwrap()
            })
            .collect();
        let global = fedavg_aggregate(&models).unwrap();
        let broadcast = Message::global(0, serialize_params(&global));
        for stream in conns.iter_mut() {
            write_message(stream, &broadcast).unwrap();
        }
        global
    });

    let mut client_handles = Vec::new();
    for (id, model) in clients.iter().cloned().enumerate() {
        client_handles.push(thread::spawn(move || {
            let mut stream = TcpStream::connect(addr).unwrap();
            write_message(&mut stream, &Message::params(0, id, serialize_params(&model)))
                .unwrap();
            let reply = read_message(&mut stream).unwrap();
            assert_eq!(reply.kind, MessageKind::Global);
            reply.params
        }));
    }

    let server_global = server.join().unwrap();
    assert_eq!(server_global, expected);
    let expected_wire = serialize_params(&expected);
    for handle in client_handles {
        let wire = handle.join().unwrap();
        assert_eq!(wire, expected_wire, "broadcast differs from aggregation");
    }
}

#[test]
fn frame_layout_is_length_prefixed_versioned_json() {
    let msg = Message::params(7, 2, vec![1.5, -2.0]);
    let mut buf = Vec::new();
    write_message(&mut buf, &msg).unwrap();
    let len = u32::from_le_bytes(buf[..4].try_into().unwrap()) as usize;
    assert_eq!(len, buf.len() - 4);
    let body: serde_json::Value = serde_json::from_slice(&buf[4..]).unwrap();
    assert_eq!(body["v"], 1);
    assert_eq!(body["type"], "params");
    assert_eq!(body["round"], 7);
    assert_eq!(body["client_id"], 2);
    assert_eq!(body["params"][0], 1.5);
}
