#include "evolvis/ws_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <condition_variable>
#include <future>
#include <map>
#include <mutex>

namespace evolvis {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
public:
    Connection(tcp::socket socket, ApiService& service) : ws_(std::move(socket)), service_(service) {}

    ~Connection() {
        if (client_) service_.disconnect(client_);
    }

    void start() {
        net::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->accept(); });
    }

    void send(std::string text) {
        net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
            self->enqueue(std::move(text));
        });
    }

private:
    void accept() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) {
                spdlog::debug("websocket handshake failed: {}", ec.message());
                return;
            }
            std::weak_ptr<Connection> weak = self;
            self->client_ = self->service_.connect([weak](const json& message) {
                if (auto c = weak.lock()) c->send(message.dump());
            });
            self->read();
        });
    }

    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                if (ec != websocket::error::closed) spdlog::debug("websocket read: {}", ec.message());
                return;
            }
            auto text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            if (auto response = self->service_.handleText(text, self->client_)) self->enqueue(std::move(*response));
            self->read();
        });
    }

    void enqueue(std::string text) {
        outbox_.push_back(std::move(text));
        if (outbox_.size() == 1) write();
    }

    void write() {
        ws_.text(true);
        ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                spdlog::debug("websocket write: {}", ec.message());
                self->outbox_.clear();
                return;
            }
            self->outbox_.pop_front();
            if (!self->outbox_.empty()) self->write();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    ApiService& service_;
    ClientId client_ = 0;
};

}  // namespace

struct WsServer::Impl {
    ApiService& service;
    net::io_context ioc;
    tcp::acceptor acceptor{ioc};
    std::vector<std::thread> threads;

    explicit Impl(ApiService& s) : service(s) {}

    void accept() {
        acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) {
                if (ec == net::error::operation_aborted) return;
                spdlog::warn("accept: {}", ec.message());
            } else {
                std::make_shared<Connection>(std::move(socket), service)->start();
            }
            accept();
        });
    }
};

WsServer::WsServer(ApiService& service, const std::string& address, unsigned short port)
    : impl_(std::make_unique<Impl>(service)) {
    tcp::endpoint endpoint(net::ip::make_address(address), port);
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen(net::socket_base::max_listen_connections);
    impl_->accept();
}

WsServer::~WsServer() { stop(); }

unsigned short WsServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void WsServer::start(int threads) {
    for (int i = 0; i < std::max(1, threads); ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
}

void WsServer::run() { impl_->ioc.run(); }

void WsServer::stop() {
    impl_->ioc.stop();
    for (auto& t : impl_->threads)
        if (t.joinable()) t.join();
    impl_->threads.clear();
}

struct WsClient::Impl {
    net::io_context ioc;
    websocket::stream<beast::tcp_stream> ws{ioc};
    beast::flat_buffer buffer;
    std::deque<std::string> outbox;
    std::thread thread;

    std::mutex mutex;
    std::condition_variable cv;
    std::map<std::int64_t, json> responses;
    std::deque<json> messages;
    bool closed = false;
    std::int64_t nextId = 0;

    void read() {
        ws.async_read(buffer, [this](beast::error_code ec, std::size_t) {
            if (ec) {
                std::lock_guard lock(mutex);
                closed = true;
                cv.notify_all();
                return;
            }
            auto text = beast::buffers_to_string(buffer.data());
            buffer.consume(buffer.size());
            {
                std::lock_guard lock(mutex);
                auto message = json::parse(text, nullptr, false);
                std::int64_t id = 0;
                if (message.is_object() && message.contains("id") && message["id"].is_number_integer())
                    id = message["id"].get<std::int64_t>();
                if (id < 0)
                    responses[id] = std::move(message);
                else
                    messages.push_back(std::move(message));
            }
            cv.notify_all();
            read();
        });
    }

    void enqueue(std::string text) {
        outbox.push_back(std::move(text));
        if (outbox.size() == 1) write();
    }

    void write() {
        ws.text(true);
        ws.async_write(net::buffer(outbox.front()), [this](beast::error_code ec, std::size_t) {
            if (ec) {
                outbox.clear();
                return;
            }
            outbox.pop_front();
            if (!outbox.empty()) write();
        });
    }
};

WsClient::WsClient(const std::string& host, unsigned short port) : impl_(std::make_unique<Impl>()) {
    tcp::resolver resolver(impl_->ioc);
    auto results = resolver.resolve(host, std::to_string(port));
    beast::get_lowest_layer(impl_->ws).connect(results);
    beast::get_lowest_layer(impl_->ws).expires_never();
    impl_->ws.handshake(host + ":" + std::to_string(port), "/");
    impl_->read();
    impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

WsClient::~WsClient() {
    close();
    impl_->ioc.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void WsClient::sendText(const std::string& text) {
    net::post(impl_->ioc, [this, text] { impl_->enqueue(text); });
}

json WsClient::call(const std::string& method, json params, std::chrono::milliseconds timeout) {
    std::int64_t id;
    {
        std::lock_guard lock(impl_->mutex);
        // Negative ids keep call() responses apart from sendText() traffic.
        id = -(++impl_->nextId);
    }
    sendText(json{{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", std::move(params)}}.dump());
    std::unique_lock lock(impl_->mutex);
    if (!impl_->cv.wait_for(lock, timeout, [&] { return impl_->responses.count(id) || impl_->closed; }))
        throw std::runtime_error("timed out waiting for " + method);
    auto it = impl_->responses.find(id);
    if (it == impl_->responses.end()) throw std::runtime_error("connection closed during " + method);
    auto response = std::move(it->second);
    impl_->responses.erase(it);
    return response;
}

std::optional<json> WsClient::nextMessage(std::chrono::milliseconds timeout) {
    std::unique_lock lock(impl_->mutex);
    if (!impl_->cv.wait_for(lock, timeout, [&] { return !impl_->messages.empty() || impl_->closed; }))
        return std::nullopt;
    if (impl_->messages.empty()) return std::nullopt;
    auto message = std::move(impl_->messages.front());
    impl_->messages.pop_front();
    return message;
}

void WsClient::close() {
    {
        std::lock_guard lock(impl_->mutex);
        if (impl_->closed) return;
    }
    auto done = std::make_shared<std::promise<void>>();
    auto future = done->get_future();
    net::post(impl_->ioc, [this, done] {
        impl_->ws.async_close(websocket::close_code::normal, [done](beast::error_code) { done->set_value(); });
    });
    future.wait_for(std::chrono::seconds(2));
}

}  // namespace evolvis
