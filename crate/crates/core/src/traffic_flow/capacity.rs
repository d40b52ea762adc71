use super::TrafficError;

/// Nominal per-vehicle rate behind the lane aggregate-capacity estimates.
pub const DEFAULT_PER_VEHICLE_RATE_MBPS: f64 = 0.5;

/// Inputs to the cooperative V2V/V2I capacity expression. Lengths in metres,
/// rates in Mb/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityParams {
    /// highway segment length
    pub segment_len: f64,
    /// distance between RSUs
    pub rsu_spacing: f64,
    pub v2i_rate: f64,
    pub v2v_rate: f64,
    /// vehicles per metre
    pub density: f64,
    /// fraction of vehicles with download requests
    pub request_fraction: f64,
    pub infra_range: f64,
    pub vehicle_range: f64,
    pub carrier_sense_range: f64,
}

impl CapacityParams {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let lengths = [
            self.segment_len,
            self.rsu_spacing,
            self.infra_range,
            self.vehicle_range,
            self.carrier_sense_range,
        ];
        if lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(TrafficError::InvalidParams("lengths must be positive"));
        }
        if !(0.0..=1.0).contains(&self.request_fraction) {
            return Err(TrafficError::InvalidParams("request fraction outside [0,1]"));
        }
        if !(self.density > 0.0) {
            return Err(TrafficError::InvalidParams("density must be positive"));
        }
        if self.rsu_spacing > self.segment_len {
            return Err(TrafficError::InvalidParams("RSU spacing exceeds segment length"));
        }
        if !(self.v2i_rate >= 0.0 && self.v2v_rate >= 0.0) {
            return Err(TrafficError::InvalidParams("rates must be non-negative"));
        }
        Ok(())
    }

    /// The `c2` helper term of the capacity expression.
    pub fn c2(&self) -> f64 {
        let p = self.request_fraction;
        (1.0 - p) * p * self.density * (1.0 - (-self.density * 2.0 * self.vehicle_range).exp())
    }
}

/// Achievable capacity (Mb/s) of a highway segment under the cooperative
/// V2V + V2I scheme, evaluated term for term:
///
/// `L/d * min{ W_I(1 - e^{-2 rho r_I}),
///             W_I(1 - e^{-p rho 2 r_I}) + W_V c2 (d - 2 r_I) / (c2 R_C + p - p e^{-2 p r_o}) + e^{-p rho 2 r_o} }`
///
/// At `p = 0` the V2V fraction is `0/0` and is taken as zero: with no
/// requesting vehicles there is nothing to relay.
pub fn theoretical_capacity(params: &CapacityParams) -> Result<f64, TrafficError> {
    params.validate()?;
    let two_ri = 2.0 * params.infra_range;
    if params.rsu_spacing <= two_ri {
        return Err(TrafficError::DomainError {
            d: params.rsu_spacing,
            two_ri,
        });
    }

    let CapacityParams {
        segment_len: l,
        rsu_spacing: d,
        v2i_rate: wi,
        v2v_rate: wv,
        density: rho,
        request_fraction: p,
        infra_range: ri,
        vehicle_range: ro,
        carrier_sense_range: rc,
    } = *params;

    let c2 = params.c2();
    let infra_only = wi * (1.0 - (-2.0 * rho * ri).exp());

    let denom = c2 * rc + p - p * (-2.0 * p * ro).exp();
    let v2v = if denom > 0.0 {
        wv * c2 * (d - two_ri) / denom
    } else {
        0.0
    };
    let cooperative = wi * (1.0 - (-p * rho * 2.0 * ri).exp()) + v2v + (-p * rho * 2.0 * ro).exp();

    Ok(l / d * infra_only.min(cooperative))
}

/// Nominal aggregate capacity of a lane carrying `vehicle_count` vehicles.
pub fn aggregate_capacity(vehicle_count: u64, per_vehicle_rate: f64) -> f64 {
    vehicle_count as f64 * per_vehicle_rate
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn grid_params(d: f64, rho: f64, rc: f64, p: f64) -> CapacityParams {
        CapacityParams {
            segment_len: 100_000.0,
            rsu_spacing: d,
            v2i_rate: 20.0,
            v2v_rate: 2.0,
            density: rho,
            request_fraction: p,
            infra_range: 400.0,
            vehicle_range: 200.0,
            carrier_sense_range: rc,
        }
    }

    #[test]
    fn aggregate_rows() {
        assert_eq!(aggregate_capacity(50, DEFAULT_PER_VEHICLE_RATE_MBPS), 25.0);
        assert_eq!(aggregate_capacity(72, DEFAULT_PER_VEHICLE_RATE_MBPS), 36.0);
        assert_eq!(aggregate_capacity(0, DEFAULT_PER_VEHICLE_RATE_MBPS), 0.0);
    }

    #[test]
    fn short_rsu_spacing_is_domain_error() {
        let p = grid_params(800.0, 0.03, 300.0, 0.5);
        assert!(matches!(
            theoretical_capacity(&p),
            Err(TrafficError::DomainError { .. })
        ));
    }

    #[test]
    fn invalid_params() {
        let mut p = grid_params(5000.0, 0.03, 300.0, 0.5);
        p.request_fraction = 1.5;
        assert!(matches!(theoretical_capacity(&p), Err(TrafficError::InvalidParams(_))));
        let mut p = grid_params(5000.0, 0.03, 300.0, 0.5);
        p.rsu_spacing = 200_000.0;
        assert!(theoretical_capacity(&p).is_err());
    }

    #[test]
    fn no_requests_leaves_exp_term_only() {
        // second branch is W_I*0 + 0 + e^0 = 1, below the infra-only branch
        let p = grid_params(5000.0, 0.03, 300.0, 0.0);
        assert_eq!(theoretical_capacity(&p).unwrap(), 20.0);
    }

    #[test]
    fn dense_traffic_saturates_infra_branch() {
        let p = grid_params(5000.0, 10.0, 300.0, 1.0);
        let cap = theoretical_capacity(&p).unwrap();
        assert!((cap - 20.0 * 20.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_v2i_rate() {
        let mut prev = 0.0;
        for wi in [1.0, 5.0, 10.0, 20.0, 40.0] {
            let mut p = grid_params(10_000.0, 0.04, 400.0, 0.3);
            p.v2i_rate = wi;
            let c = theoretical_capacity(&p).unwrap();
            assert!(c >= prev);
            prev = c;
        }
    }
}
