#pragma once
#include <stdexcept>
#include <string>

namespace slg {

struct Error : std::runtime_error {
    explicit Error(const std::string& m) : std::runtime_error(m) {}
};

struct NoConvergence : Error { using Error::Error; };
struct InsideCluster : Error { using Error::Error; };
struct GridTooCoarse : Error { using Error::Error; };
struct DomainContainsOrigin : Error { using Error::Error; };
struct CoincidentDrivers : Error { using Error::Error; };
struct DriverEscaped : Error { using Error::Error; };
struct ClockSkew : Error { using Error::Error; };
struct NegativeDensity : Error { using Error::Error; };
struct NewtonDiverged : Error { using Error::Error; };
struct CuspDetected : Error { using Error::Error; };
struct DriverCollision : Error { using Error::Error; };
struct NoSPoint : Error { using Error::Error; };
struct NoFjordDetected : Error { using Error::Error; };
struct NonpositiveDt : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace slg
