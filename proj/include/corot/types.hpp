#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace corot {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Error hierarchy. Every failure the library reports derives from Error so
// the CLI can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class DegenerateFace : public Error {
 public:
  using Error::Error;
};

class MaterialError : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, int iterations, double final_norm)
      : Error(what), iterations_(iterations), final_norm_(final_norm) {}
  int iterations() const { return iterations_; }
  double final_norm() const { return final_norm_; }

 private:
  int iterations_;
  double final_norm_;
};

class SingularTangent : public Error {
 public:
  using Error::Error;
};

class SingularNormalMatrix : public Error {
 public:
  using Error::Error;
};

class SingularF : public Error {
 public:
  SingularF(const std::string& what, int element) : Error(what), element_(element) {}
  int element() const { return element_; }

 private:
  int element_;
};

class LinearSolveFailure : public Error {
 public:
  using Error::Error;
};

class InsufficientConstraints : public Error {
 public:
  using Error::Error;
};

class StepFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace corot
