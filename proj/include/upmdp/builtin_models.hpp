#pragma once

#include <string>

#include "upmdp/model.hpp"

namespace upmdp {

/// Four-state chain with two non-absorbing states. Action "advance" moves one
/// state forward with a per-(state, action) success parameter, action "jump"
/// moves two states forward (saturating at the goal); failures land in the
/// absorbing critical state. Parameters p00, p01, p10, p11 with a uniform
/// [0,1]^4 distribution by default.
inline UpMdpTemplate builtin_toy_model(double gamma = 0.99) {
    UpMdpTemplate t;
    t.state_names = {"s0", "s1", "goal", "critical"};
    t.action_names = {"advance", "jump"};
    t.params = {"p00", "p01", "p10", "p11"};
    t.gamma = gamma;
    t.initial = {1.0, 0.0, 0.0, 0.0};
    t.goal = {0, 0, 1, 0};
    t.safe = {1, 1, 0, 0};
    t.distribution = uniform_box_distribution(4);

    t.enabled = {{0, 1}, {0, 1}, {0}, {0}};
    t.trans.assign(4, {});
    auto row = [&](int s, const std::string& success_param, int success_target) {
        std::vector<TransitionEntry> r;
        TransitionEntry hit;
        hit.target = success_target;
        hit.expr = parse_expr(success_param);
        bind_expr(hit.expr, t.params);
        TransitionEntry miss;
        miss.target = 3;
        miss.expr = parse_expr("1 - " + success_param);
        bind_expr(miss.expr, t.params);
        r.push_back(std::move(hit));
        r.push_back(std::move(miss));
        t.trans[s].push_back(std::move(r));
    };
    row(0, "p00", 1);  // advance: s0 -> s1
    row(0, "p01", 2);  // jump: s0 -> goal
    row(1, "p10", 2);  // advance: s1 -> goal
    row(1, "p11", 2);  // jump saturates at goal
    for (int s : {2, 3}) {
        TransitionEntry loop;
        loop.target = s;
        loop.expr = parse_expr("1");
        t.trans[s].push_back({std::move(loop)});
    }
    validate_template(t);
    return t;
}

/// Wind configuration for the grid world: the wind pushes one cell in a fixed
/// direction with a per-zone probability parameter (zones are vertical bands).
struct GridWindParams {
    int zones = 3;
    double push_lo = 0.0;
    double push_hi = 0.5;
    int direction = 3;  // 0=N (+y), 1=E (+x), 2=S (-y), 3=W (-x)
};

/// Rectangular grid with four move actions. The agent starts at (0,0) and
/// must reach the opposite corner; a column of obstacle cells with a single
/// gap at the top row blocks the direct route. Moves are deterministic, then
/// the wind pushes one cell in its direction with the zone's parameter
/// probability. Moves and pushes clamp at the border.
inline UpMdpTemplate builtin_gridworld(int width, int height, const GridWindParams& wind = {}) {
    if (width < 2 || height < 2) throw InvalidGridError("grid needs width and height of at least 2");
    if (width * height > 4096) throw InvalidGridError("grid larger than 4096 cells");
    if (wind.zones < 1 || wind.zones > width) throw InvalidGridError("zone count must lie in [1, width]");
    if (!(wind.push_lo >= 0.0 && wind.push_lo <= wind.push_hi && wind.push_hi <= 1.0))
        throw InvalidGridError("push probability bounds must satisfy 0 <= lo <= hi <= 1");
    if (wind.direction < 0 || wind.direction > 3) throw InvalidGridError("unknown wind direction");

    UpMdpTemplate t;
    t.action_names = {"north", "east", "south", "west"};
    t.gamma = 0.99;

    const int n = width * height;
    auto cell = [&](int x, int y) { return y * width + x; };
    t.state_names.resize(n);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            t.state_names[cell(x, y)] = "c" + std::to_string(x) + "_" + std::to_string(y);

    const int goal_cell = cell(width - 1, height - 1);
    std::vector<char> obstacle(n, 0);
    const int wall_x = width / 2;
    for (int y = 0; y + 1 < height; ++y) obstacle[cell(wall_x, y)] = 1;
    if (obstacle[goal_cell] || obstacle[cell(0, 0)])
        throw InvalidGridError("obstacle layout covers the start or goal cell");

    t.goal.assign(n, 0);
    t.safe.assign(n, 0);
    t.goal[goal_cell] = 1;
    for (int s = 0; s < n; ++s)
        if (!obstacle[s] && s != goal_cell) t.safe[s] = 1;

    t.initial.assign(n, 0.0);
    t.initial[cell(0, 0)] = 1.0;

    t.params.resize(wind.zones);
    for (int z = 0; z < wind.zones; ++z) t.params[z] = "w" + std::to_string(z);
    ParameterDistribution dist;
    dist.kind = ParameterDistribution::Kind::box;
    dist.box.assign(wind.zones, {wind.push_lo, wind.push_hi});
    t.distribution = dist;

    const int dx[4] = {0, 1, 0, -1};
    const int dy[4] = {1, 0, -1, 0};
    auto step = [&](int x, int y, int dir) {
        const int nx = std::clamp(x + dx[dir], 0, width - 1);
        const int ny = std::clamp(y + dy[dir], 0, height - 1);
        return cell(nx, ny);
    };

    t.enabled.assign(n, {});
    t.trans.assign(n, {});
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const int s = cell(x, y);
            if (t.is_terminal(s)) {
                t.enabled[s] = {0};
                TransitionEntry loop;
                loop.target = s;
                loop.expr = parse_expr("1");
                t.trans[s].push_back({std::move(loop)});
                continue;
            }
            const int zone = std::min(wind.zones - 1, x * wind.zones / width);
            const std::string w = t.params[zone];
            for (int a = 0; a < 4; ++a) {
                t.enabled[s].push_back(a);
                const int moved = step(x, y, a);
                std::vector<TransitionEntry> row;
                const int pushed =
                    t.is_terminal(moved)
                        ? moved
                        : step(moved % width, moved / width, wind.direction);
                if (pushed == moved) {
                    TransitionEntry only;
                    only.target = moved;
                    only.expr = parse_expr("1");
                    row.push_back(std::move(only));
                } else {
                    TransitionEntry stayed;
                    stayed.target = moved;
                    stayed.expr = parse_expr("1 - " + w);
                    bind_expr(stayed.expr, t.params);
                    TransitionEntry blown;
                    blown.target = pushed;
                    blown.expr = parse_expr(w);
                    bind_expr(blown.expr, t.params);
                    row.push_back(std::move(stayed));
                    row.push_back(std::move(blown));
                }
                t.trans[s].push_back(std::move(row));
            }
        }
    validate_template(t);
    return t;
}

}  // namespace upmdp
