use crate::model::{BaseStation, NetworkConfig, NetworkModel, Position, User};

/// `num_bs` stations on a circle of radius `distance` around the MBS, one user each,
/// unit constants everywhere else.
pub fn single_link_network(
    num_bs: usize,
    num_subchannels: usize,
    distance: f64,
    alpha: f64,
) -> NetworkModel {
    let base_stations = (0..num_bs)
        .map(|id| {
            let phi = id as f64 * std::f64::consts::TAU / num_bs as f64;
            BaseStation {
                id,
                position: Position::new(distance * phi.cos(), distance * phi.sin()),
                cpu_hz: 1e9,
                validation_hz: 1e9,
                mbs_distance: distance,
            }
        })
        .collect::<Vec<_>>();
    let users = (0..num_bs)
        .map(|id| User { id, position: base_stations[id].position, home_bs: id, samples: 100 })
        .collect();
    NetworkModel {
        users,
        base_stations,
        mbs_position: Position::new(0.0, 0.0),
        bs_tx_power_w: 1.0,
        mbs_tx_power_w: 1.0,
        num_subchannels,
        uplink_bandwidth_hz: 1e6,
        downlink_bandwidth_hz: 1e6,
        noise_w: 1e-12,
        path_loss_exponent: alpha,
        sample_bytes: 1,
        cycles_per_sample: 1.0,
        cycles_per_agg_unit: 1.0,
        cycles_per_validation_unit: 1.0,
        tx_factor: 1.0,
        model_bits: 1.0,
        block_header_bits: 1.0,
        num_producers: 1,
    }
}

pub fn reference_config() -> NetworkConfig {
    NetworkConfig {
        num_users: 100,
        seed: 3,
        mbs_position: [0.0, 0.0],
        bs_positions: vec![[300.0, 0.0], [0.0, 450.0], [-600.0, 0.0], [0.0, -350.0], [400.0, 400.0]],
        bs_cpu_ghz: vec![2.6, 1.8, 3.6, 2.4, 2.4],
        bs_validation_ghz: None,
        bs_tx_power_dbm: 34.0,
        mbs_tx_power_dbm: 42.0,
        num_subchannels: 5,
        uplink_bandwidth_mhz: 30.0,
        downlink_bandwidth_mhz: 30.0,
        noise_dbm: -174.0,
        path_loss_exponent: 3.0,
        cell_radius_m: 150.0,
        twin_samples: [400, 600],
        sample_bytes: 3072,
        cycles_per_sample: 1e6,
        cycles_per_agg_unit: 1.0,
        cycles_per_validation_unit: 0.05,
        tx_factor: 1.0,
        model_bits: 5e7,
        block_header_bits: 1000.0,
        num_producers: 3,
    }
}
