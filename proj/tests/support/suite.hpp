#pragma once

// Scripted drivers used by the event-detection and cohort checks.

#include <string>
#include <vector>

#include "atma/agents.hpp"
#include "atma/config.hpp"

namespace suite {

struct Script {
  std::string name;
  std::string text;
  bool passes = true;  // expected to complete the pass
};

inline std::string num(double v) {
  std::string s = std::to_string(v);
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  return s;
}

// Approach, brake behind the follower, pass on the left, return right, with
// an optional second brake after the pass.
inline Script pass_script(int k, double cruise, double brake_at, double brake, double crawl, double change_at,
                          double back_at, bool second_brake) {
  std::string t;
  t += "when frame >= " + std::to_string(20 + 5 * k) + " : cruise " + num(cruise) + "\n";
  t += "when p_f < " + num(brake_at) + " : coast brake " + num(brake) + "\n";
  t += "when speed <= " + num(crawl) + " : cruise " + num(crawl) + "\n";
  t += "when p_f < " + num(change_at) + " : lane left indicator left\n";
  t += "when p_l < 0 : cruise " + num(cruise) + " indicator off\n";
  t += "when p_l < " + num(-back_at) + " : lane right indicator right\n";
  t += "when p_l < " + num(-back_at - 80) + " : indicator off\n";
  if (second_brake) {
    t += "when p_l < -900 : coast brake 0.35\n";
    t += "when speed <= 35 : cruise " + num(cruise) + "\n";
  }
  return {"pass" + std::to_string(k), t, true};
}

inline Script abort_script(int k, double cruise, double change_at) {
  std::string t;
  t += "when frame >= " + std::to_string(25 + 3 * k) + " : cruise " + num(cruise) + "\n";
  t += "when p_f < 500 : coast brake 0.4\n";
  t += "when speed <= 20 : cruise 20\n";
  t += "when p_f < " + num(change_at) + " : lane left\n";
  t += "when p_f < " + num(change_at - 110) + " : lane right\n";
  t += "when p_f < 80 : cruise 14\n";
  return {"abort" + std::to_string(k), t, false};
}

// Brakes steadily through the 100-200 ft band behind the follower and
// accelerates through the same band ahead of the lead.
inline Script correlation_script() {
  std::string t;
  t += "when frame >= 30 : cruise 50\n";
  t += "when p_f < 260 : coast brake 0.2\n";
  t += "when speed <= 18 : cruise 18\n";
  t += "when p_f < 60 : lane left indicator left\n";
  t += "when p_l < 0 : accel 0.8 indicator off\n";
  t += "when p_l < -350 : cruise 60 lane right\n";
  return {"decel_pass_accel", t, true};
}

// Twenty scripts: eighteen passes with varied speeds, brake strengths and
// change distances, two of them with a second brake, and two aborted passes.
inline std::vector<Script> event_suite() {
  std::vector<Script> out;
  for (int k = 0; k < 17; ++k) {
    const double cruise = 45 + (k * 7) % 18;
    const double brake_at = 550 + 40 * (k % 8);
    const double brake = 0.3 + 0.05 * (k % 7);
    const double crawl = 20 + 2 * (k % 6);
    const double change_at = 200 + 20 * (k % 9);
    const double back_at = 150 + 25 * (k % 5);
    out.push_back(pass_script(k, cruise, brake_at, brake, crawl, change_at, back_at, k % 6 == 5));
  }
  out.push_back(correlation_script());
  out.push_back(abort_script(0, 45, 260));
  out.push_back(abort_script(1, 55, 300));
  return out;
}

// Sixteen scripts for the cohort run: fifteen passes and one abort.
inline std::vector<Script> cohort_scripts() {
  auto all = event_suite();
  std::vector<Script> out(all.begin(), all.begin() + 15);
  out.push_back(all.back());
  return out;
}

}  // namespace suite
